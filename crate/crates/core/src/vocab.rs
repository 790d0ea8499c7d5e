//! Vocabulary of symbols and bag-of-symbols count vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::symbols::{Symbol, SymbolMultiset};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("EmptyCorpus: cannot build a vocabulary from zero containers")]
    EmptyCorpus,
}

/// Ordered set of distinct symbols (lexicographic by canonical string).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, usize>,
}

impl Vocabulary {
    /// Sorts and deduplicates `symbols`.
    pub fn from_symbols<I: IntoIterator<Item = Symbol>>(symbols: I) -> Self {
        let set: BTreeSet<Symbol> = symbols.into_iter().collect();
        let symbols: Vec<Symbol> = set.into_iter().collect();
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Vocabulary { symbols, index }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn get(&self, i: usize) -> Option<&Symbol> {
        self.symbols.get(i)
    }

    pub fn position(&self, symbol: &Symbol) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// Sub-vocabulary of the symbols for which `keep` is true.
    pub fn restrict(&self, keep: &[bool]) -> Vocabulary {
        assert_eq!(keep.len(), self.len(), "mask length must match vocabulary");
        Vocabulary::from_symbols(
            self.symbols
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(s, _)| s.clone()),
        )
    }
}

/// Union of all symbols in the corpus.
pub fn build_vocabulary<'a, I>(corpus: I) -> Result<Vocabulary, VocabError>
where
    I: IntoIterator<Item = &'a SymbolMultiset>,
{
    let mut any = false;
    let mut set = BTreeSet::new();
    for ms in corpus {
        any = true;
        set.extend(ms.symbols().cloned());
    }
    if !any {
        return Err(VocabError::EmptyCorpus);
    }
    Ok(Vocabulary::from_symbols(set))
}

/// Count vector over a vocabulary, stored sparsely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    counts: BTreeMap<usize, u32>,
    len: usize,
    pub source_id: String,
}

impl FeatureVector {
    pub fn zeros(len: usize, source_id: impl Into<String>) -> Self {
        FeatureVector {
            counts: BTreeMap::new(),
            len,
            source_id: source_id.into(),
        }
    }

    pub fn from_dense(counts: &[u32], source_id: impl Into<String>) -> Self {
        FeatureVector {
            counts: counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i, c))
                .collect(),
            len: counts.len(),
            source_id: source_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Count at position `i`; zero for absent symbols and out-of-range indices.
    pub fn get(&self, i: usize) -> u32 {
        self.counts.get(&i).copied().unwrap_or(0)
    }

    pub fn set(&mut self, i: usize, count: u32) {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        if count == 0 {
            self.counts.remove(&i);
        } else {
            self.counts.insert(i, count);
        }
    }

    /// Non-zero entries in index order.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    pub fn to_dense(&self) -> Vec<u32> {
        let mut out = vec![0; self.len];
        for (i, c) in self.nonzero() {
            out[i] = c;
        }
        out
    }

    pub fn l1_norm(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }
}

/// Maps a multiset onto `vocab`; symbols outside the vocabulary are dropped.
pub fn vectorize(ms: &SymbolMultiset, vocab: &Vocabulary) -> FeatureVector {
    let mut v = FeatureVector::zeros(vocab.len(), ms.source_id.clone());
    for (symbol, count) in ms.iter() {
        if let Some(i) = vocab.position(symbol) {
            v.counts.insert(i, count);
        }
    }
    v
}
