//! Training and classification over symbol multisets: vocabulary, LLR
//! filter, class weights and tree composed into one model.

use serde::Serialize;
use thiserror::Error;

use crate::cart::{CartError, DecisionTreeModel, PathStep, ReplayError, TreeParams};
use crate::llr::{filter_vocabulary, FilterConfig, LabeledMultiset, LlrError, LlrReport};
use crate::symbols::SymbolMultiset;
use crate::vocab::{build_vocabulary, vectorize, VocabError, Vocabulary};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Llr(#[from] LlrError),
    #[error(transparent)]
    Cart(#[from] CartError),
    #[error("explanation replay failed for '{source_id}': {error}")]
    Replay {
        source_id: String,
        error: ReplayError,
    },
    #[error("replayed label '{replayed}' differs from predicted '{predicted}' for '{source_id}'")]
    ReplayDisagrees {
        source_id: String,
        predicted: String,
        replayed: String,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainConfig {
    pub filter: FilterConfig,
    pub tree: TreeParams,
}

/// Provenance recorded with a model. All fields are optional so that fold
/// models trained in memory stay reproducible byte for byte.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ModelMetadata {
    pub scenario: Option<String>,
    pub manifest_digest: Option<String>,
    pub created_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// Every symbol seen in training, lexicographic.
    pub vocabulary: Vocabulary,
    /// `kept[i]` tells whether `vocabulary[i]` survived the LLR filter.
    pub kept: Vec<bool>,
    pub tau: f64,
    /// Tree over the kept symbols only.
    pub tree: DecisionTreeModel,
    pub metadata: ModelMetadata,
}

/// Result of a training run; the report is absent when the filter was
/// skipped because the training set holds a single class.
#[derive(Debug, Clone)]
pub struct Training {
    pub model: TrainedModel,
    pub llr_report: Option<LlrReport>,
}

pub fn train_model(
    corpus: &[LabeledMultiset],
    cfg: &TrainConfig,
) -> Result<Training, PipelineError> {
    let vocabulary = build_vocabulary(corpus.iter().map(|s| &s.symbols))?;
    let labels: Vec<&str> = corpus.iter().map(|s| s.label.as_str()).collect();
    let single_class = labels.iter().all(|l| *l == labels[0]);
    // With one class there is no ratio to take; nothing is discriminative
    // and the tree degenerates to a leaf.
    let (kept, filtered, llr_report) = if single_class {
        (vec![false; vocabulary.len()], Vocabulary::default(), None)
    } else {
        let (filtered, report) = filter_vocabulary(&vocabulary, corpus, &cfg.filter)?;
        (report.kept_mask(), filtered, Some(report))
    };
    let vectors: Vec<_> = corpus
        .iter()
        .map(|s| vectorize(&s.symbols, &filtered))
        .collect();
    let tree = DecisionTreeModel::fit(&vectors, &labels, filtered, cfg.tree)?;
    Ok(Training {
        model: TrainedModel {
            vocabulary,
            kept,
            tau: cfg.filter.tau(),
            tree,
            metadata: ModelMetadata::default(),
        },
        llr_report,
    })
}

/// A prediction with its explanation, already checked by replay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub source: String,
    pub label: String,
    pub path: Vec<PathStep>,
}

impl TrainedModel {
    pub fn classes(&self) -> &[String] {
        self.tree.classes()
    }

    pub fn kept_vocabulary(&self) -> &Vocabulary {
        &self.tree.vocabulary
    }

    /// Whether the filter removed every symbol, leaving a majority leaf.
    pub fn is_degenerate(&self) -> bool {
        self.tree.vocabulary.is_empty()
    }

    pub fn predict(&self, symbols: &SymbolMultiset) -> Result<&str, PipelineError> {
        let v = vectorize(symbols, &self.tree.vocabulary);
        Ok(self.tree.predict(&v)?)
    }

    /// Predicts, extracts the decision path and replays it; a path that does
    /// not reproduce the prediction is an error.
    pub fn classify(&self, symbols: &SymbolMultiset) -> Result<Verdict, PipelineError> {
        let v = vectorize(symbols, &self.tree.vocabulary);
        let predicted = self.tree.predict(&v)?;
        let path = self.tree.decision_path(&v)?;
        let replayed = self
            .tree
            .replay(&path, &v)
            .map_err(|error| PipelineError::Replay {
                source_id: symbols.source_id.clone(),
                error,
            })?;
        if replayed != predicted {
            return Err(PipelineError::ReplayDisagrees {
                source_id: symbols.source_id.clone(),
                predicted: predicted.to_string(),
                replayed: replayed.to_string(),
            });
        }
        Ok(Verdict {
            source: symbols.source_id.clone(),
            label: predicted.to_string(),
            path,
        })
    }
}
