//! Pairwise log-likelihood ratio filtering of the vocabulary.
//!
//! For a symbol `s` and class `C`, `W_C(s) = (k + 1) / (n + 1)` where `n` is
//! the number of training containers in `C` and `k` the number of those
//! containing `s` at least once. A symbol is kept iff some ordered pair of
//! distinct classes has `ln(W_u(s) / W_v(s)) > tau`.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::symbols::{Symbol, SymbolMultiset};
use crate::vocab::Vocabulary;

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlrError {
    #[error("SingleClass: likelihood ratios need at least two classes, found {0}")]
    SingleClass(usize),
    #[error("EmptyClass: class '{0}' has no training containers")]
    EmptyClass(String),
    #[error("UnknownClass: '{0}'")]
    UnknownClass(String),
    #[error("InvalidThreshold: tau must be a positive finite number, got {0}")]
    InvalidThreshold(f64),
}

/// A container's symbols together with its class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledMultiset {
    pub symbols: SymbolMultiset,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    tau: f64,
}

impl FilterConfig {
    pub fn new(tau: f64) -> Result<Self, LlrError> {
        if tau.is_finite() && tau > 0.0 {
            Ok(FilterConfig { tau })
        } else {
            Err(LlrError::InvalidThreshold(tau))
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { tau: DEFAULT_TAU }
    }
}

/// Per-class container counts and per-symbol presence counts.
#[derive(Debug, Clone)]
pub struct ClassFrequencyTable {
    classes: Vec<String>,
    class_sizes: Vec<usize>,
    presence: HashMap<Symbol, Vec<usize>>,
}

impl ClassFrequencyTable {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_index(&self, class: &str) -> Result<usize, LlrError> {
        self.classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| LlrError::UnknownClass(class.to_string()))
    }

    pub fn class_size(&self, class: usize) -> usize {
        self.class_sizes[class]
    }

    /// Number of containers of `class` that contain `symbol`.
    pub fn present_count(&self, symbol: &Symbol, class: usize) -> usize {
        self.presence.get(symbol).map_or(0, |p| p[class])
    }

    /// Smoothed presence frequency `(k + 1) / (n + 1)`.
    pub fn frequency(&self, symbol: &Symbol, class: usize) -> f64 {
        let k = self.present_count(symbol, class) as f64;
        let n = self.class_sizes[class] as f64;
        (k + 1.0) / (n + 1.0)
    }

    fn llr_by_index(&self, symbol: &Symbol, u: usize, v: usize) -> f64 {
        (self.frequency(symbol, u) / self.frequency(symbol, v)).ln()
    }
}

/// Builds the table with classes taken from the labels, sorted.
pub fn class_frequency(corpus: &[LabeledMultiset]) -> Result<ClassFrequencyTable, LlrError> {
    let classes: BTreeSet<&str> = corpus.iter().map(|s| s.label.as_str()).collect();
    let classes: Vec<String> = classes.into_iter().map(str::to_string).collect();
    class_frequency_with_classes(corpus, &classes)
}

/// Builds the table over an explicit class list. Samples whose label is not
/// listed are rejected.
pub fn class_frequency_with_classes(
    corpus: &[LabeledMultiset],
    classes: &[String],
) -> Result<ClassFrequencyTable, LlrError> {
    if classes.len() < 2 {
        return Err(LlrError::SingleClass(classes.len()));
    }
    let position: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut class_sizes = vec![0usize; classes.len()];
    let mut presence: HashMap<Symbol, Vec<usize>> = HashMap::new();
    for sample in corpus {
        let c = *position
            .get(sample.label.as_str())
            .ok_or_else(|| LlrError::UnknownClass(sample.label.clone()))?;
        class_sizes[c] += 1;
        for symbol in sample.symbols.symbols() {
            presence
                .entry(symbol.clone())
                .or_insert_with(|| vec![0; classes.len()])[c] += 1;
        }
    }
    if let Some(i) = class_sizes.iter().position(|&n| n == 0) {
        return Err(LlrError::EmptyClass(classes[i].clone()));
    }
    Ok(ClassFrequencyTable {
        classes: classes.to_vec(),
        class_sizes,
        presence,
    })
}

/// `ln(W_u(s) / W_v(s))`.
pub fn llr(
    symbol: &Symbol,
    cu: &str,
    cv: &str,
    table: &ClassFrequencyTable,
) -> Result<f64, LlrError> {
    let u = table.class_index(cu)?;
    let v = table.class_index(cv)?;
    Ok(table.llr_by_index(symbol, u, v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlrEntry {
    pub symbol: Symbol,
    /// Ordered class pair `(u, v)` attaining the maximum.
    pub best_pair: (String, String),
    /// Maximum over ordered pairs of `ln(W_u / W_v)`; never negative.
    pub max_llr: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlrReport {
    pub tau: f64,
    /// One entry per input vocabulary symbol, in vocabulary order.
    pub entries: Vec<LlrEntry>,
}

impl LlrReport {
    pub fn kept_mask(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.kept).collect()
    }

    pub fn kept_count(&self) -> usize {
        self.entries.iter().filter(|e| e.kept).count()
    }

    /// Entries sorted by descending |LLR|, then by symbol.
    pub fn ranked(&self) -> Vec<&LlrEntry> {
        let mut out: Vec<&LlrEntry> = self.entries.iter().collect();
        out.sort_by(|a, b| {
            b.max_llr
                .abs()
                .total_cmp(&a.max_llr.abs())
                .then_with(|| a.symbol.cmp(&b.symbol))
        });
        out
    }
}

/// Scores every symbol of `vocab` against the table.
pub fn score_vocabulary(
    vocab: &Vocabulary,
    table: &ClassFrequencyTable,
    cfg: &FilterConfig,
) -> LlrReport {
    let k = table.classes.len();
    let entries = vocab
        .symbols()
        .iter()
        .map(|symbol| {
            let mut best = (0, 1);
            let mut best_llr = f64::NEG_INFINITY;
            for u in 0..k {
                for v in 0..k {
                    if u == v {
                        continue;
                    }
                    let l = table.llr_by_index(symbol, u, v);
                    if l > best_llr {
                        best_llr = l;
                        best = (u, v);
                    }
                }
            }
            LlrEntry {
                symbol: symbol.clone(),
                best_pair: (table.classes[best.0].clone(), table.classes[best.1].clone()),
                max_llr: best_llr,
                kept: best_llr > cfg.tau,
            }
        })
        .collect();
    LlrReport {
        tau: cfg.tau,
        entries,
    }
}

/// Keeps the symbols whose maximum pairwise LLR exceeds `tau`. Field- and
/// value-symbols are judged independently.
pub fn filter_vocabulary(
    vocab: &Vocabulary,
    corpus: &[LabeledMultiset],
    cfg: &FilterConfig,
) -> Result<(Vocabulary, LlrReport), LlrError> {
    let table = class_frequency(corpus)?;
    let report = score_vocabulary(vocab, &table, cfg);
    let kept = vocab.restrict(&report.kept_mask());
    Ok((kept, report))
}
