//! Binary CART over count features.
//!
//! Trees are grown greedily on weighted Gini impurity decrease with
//! thresholds at midpoints of consecutive observed counts, then optionally
//! pruned by minimal cost-complexity. Samples with `count <= threshold` go
//! left.

mod dot;
mod prune;
mod split;

pub use dot::to_dot;
pub use prune::{effective_alphas, prune};
pub use split::{best_split, SplitCandidate, TIE_EPSILON};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocab::{FeatureVector, Vocabulary};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CartError {
    #[error("EmptyTrainingSet: no training samples")]
    EmptyTrainingSet,
    #[error("ZeroMass: impurity of a node with no weighted mass")]
    ZeroMass,
    #[error("DimensionMismatch: model expects {expected} features, vector has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("label '{0}' is not one of the model classes")]
    UnknownLabel(String),
    #[error("{0} labels for {1} samples")]
    LengthMismatch(usize, usize),
}

/// Inverse-frequency class weights `w_c = N / (K * n_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    classes: Vec<String>,
    weights: Vec<f64>,
}

impl ClassWeights {
    /// Weights for an explicit, sorted class list.
    pub fn from_parts(classes: Vec<String>, weights: Vec<f64>) -> Self {
        assert_eq!(classes.len(), weights.len());
        ClassWeights { classes, weights }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn weight(&self, label: &str) -> Option<f64> {
        self.class_index(label).map(|i| self.weights[i])
    }

    /// Same classes, every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        ClassWeights {
            classes: self.classes.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }
}

pub fn compute_class_weights<S: AsRef<str>>(labels: &[S]) -> Result<ClassWeights, CartError> {
    if labels.is_empty() {
        return Err(CartError::EmptyTrainingSet);
    }
    let classes: BTreeSet<&str> = labels.iter().map(AsRef::as_ref).collect();
    let classes: Vec<String> = classes.into_iter().map(str::to_string).collect();
    let n = labels.len() as f64;
    let k = classes.len() as f64;
    let weights = classes
        .iter()
        .map(|c| {
            let n_c = labels.iter().filter(|l| l.as_ref() == c).count() as f64;
            n / (k * n_c)
        })
        .collect();
    Ok(ClassWeights { classes, weights })
}

/// `1 - sum p_c^2` over weighted class masses.
pub fn gini(masses: &[f64]) -> Result<f64, CartError> {
    let total: f64 = masses.iter().sum();
    if total <= 0.0 {
        return Err(CartError::ZeroMass);
    }
    Ok(gini_unchecked(masses, total))
}

pub(crate) fn gini_unchecked(masses: &[f64], total: f64) -> f64 {
    1.0 - masses
        .iter()
        .map(|m| (m / total) * (m / total))
        .sum::<f64>()
}

/// Index of the heaviest class; near-ties go to the lowest index, which is
/// the lexicographically smallest class name.
pub(crate) fn argmax_class(masses: &[f64]) -> usize {
    let total: f64 = masses.iter().sum();
    let max = masses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * total.max(f64::MIN_POSITIVE);
    masses.iter().position(|&m| m >= max - tol).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub ccp_alpha: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            ccp_alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Leaf,
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Weighted class mass of the training samples reaching this node.
    pub distribution: Vec<f64>,
    pub n_samples: usize,
    /// Class index this node predicts when it is (or is collapsed to) a leaf.
    pub label: usize,
    pub kind: NodeKind,
}

impl TreeNode {
    pub fn leaf(distribution: Vec<f64>, n_samples: usize) -> Self {
        TreeNode {
            label: argmax_class(&distribution),
            distribution,
            n_samples,
            kind: NodeKind::Leaf,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }

    pub fn leaf_count(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf => 1,
            NodeKind::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf => 0,
            NodeKind::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf => 1,
            NodeKind::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    /// Leaf reached by a dense count lookup.
    pub fn leaf_for(&self, count_of: impl Fn(usize) -> u32) -> &TreeNode {
        let mut node = self;
        while let NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } = &node.kind
        {
            node = if f64::from(count_of(*feature)) <= *threshold {
                left
            } else {
                right
            };
        }
        node
    }

    fn max_feature(&self) -> Option<usize> {
        match &self.kind {
            NodeKind::Leaf => None,
            NodeKind::Split {
                feature,
                left,
                right,
                ..
            } => [Some(*feature), left.max_feature(), right.max_feature()]
                .into_iter()
                .flatten()
                .max(),
        }
    }
}

/// Grows a tree on dense rows. `labels[i]` indexes `weights.classes()`.
pub fn grow(
    rows: &[Vec<u32>],
    labels: &[usize],
    weights: &ClassWeights,
    params: &TreeParams,
) -> Result<TreeNode, CartError> {
    if rows.is_empty() {
        return Err(CartError::EmptyTrainingSet);
    }
    if rows.len() != labels.len() {
        return Err(CartError::LengthMismatch(labels.len(), rows.len()));
    }
    let n_features = rows[0].len();
    let columns: Vec<Vec<u32>> = (0..n_features)
        .map(|f| rows.iter().map(|r| r[f]).collect())
        .collect();
    let grower = split::Grower {
        columns: &columns,
        labels,
        class_weights: weights.weights(),
        params,
    };
    Ok(grower.build((0..rows.len()).collect(), 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Left,
    Right,
}

/// One threshold check on the way from the root to a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub feature: usize,
    pub symbol: String,
    pub threshold: f64,
    pub observed: u32,
    pub branch: Branch,
}

impl fmt::Display for PathStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.branch {
            Branch::Left => "<=",
            Branch::Right => ">",
        };
        write!(
            f,
            "count({}) = {} {op} {}",
            self.symbol, self.observed, self.threshold
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("path has more steps than the tree has levels")]
    TooLong,
    #[error("path ends before reaching a leaf")]
    TooShort,
    #[error("step {0} tests a different feature than the tree node")]
    FeatureMismatch(usize),
    #[error("step {0} records a count that disagrees with the vector")]
    CountMismatch(usize),
    #[error("step {0} takes a branch its own count does not justify")]
    BranchMismatch(usize),
    #[error(transparent)]
    Model(#[from] CartError),
}

/// A trained tree together with its feature space and classes.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreeModel {
    pub root: TreeNode,
    pub vocabulary: Vocabulary,
    pub weights: ClassWeights,
    pub params: TreeParams,
}

impl DecisionTreeModel {
    /// Computes class weights, grows and prunes.
    pub fn fit<S: AsRef<str>>(
        vectors: &[FeatureVector],
        labels: &[S],
        vocabulary: Vocabulary,
        params: TreeParams,
    ) -> Result<Self, CartError> {
        if vectors.len() != labels.len() {
            return Err(CartError::LengthMismatch(labels.len(), vectors.len()));
        }
        let weights = compute_class_weights(labels)?;
        let label_idx: Vec<usize> = labels
            .iter()
            .map(|l| {
                weights
                    .class_index(l.as_ref())
                    .expect("class derived from labels")
            })
            .collect();
        let rows: Vec<Vec<u32>> = vectors
            .iter()
            .map(|v| {
                if v.len() == vocabulary.len() {
                    Ok(v.to_dense())
                } else {
                    Err(CartError::DimensionMismatch {
                        expected: vocabulary.len(),
                        actual: v.len(),
                    })
                }
            })
            .collect::<Result<_, _>>()?;
        let grown = grow(&rows, &label_idx, &weights, &params)?;
        let root = prune(&grown, params.ccp_alpha);
        Ok(DecisionTreeModel {
            root,
            vocabulary,
            weights,
            params,
        })
    }

    pub fn classes(&self) -> &[String] {
        self.weights.classes()
    }

    /// Checks that every split refers to a feature of the vocabulary and
    /// every label to a class.
    pub fn validate(&self) -> Result<(), CartError> {
        if let Some(f) = self.root.max_feature() {
            if f >= self.vocabulary.len() {
                return Err(CartError::DimensionMismatch {
                    expected: self.vocabulary.len(),
                    actual: f + 1,
                });
            }
        }
        Ok(())
    }

    fn check_dim(&self, v: &FeatureVector) -> Result<(), CartError> {
        if v.len() != self.vocabulary.len() {
            return Err(CartError::DimensionMismatch {
                expected: self.vocabulary.len(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, v: &FeatureVector) -> Result<&str, CartError> {
        self.check_dim(v)?;
        let leaf = self.root.leaf_for(|f| v.get(f));
        Ok(&self.classes()[leaf.label])
    }

    pub fn decision_path(&self, v: &FeatureVector) -> Result<Vec<PathStep>, CartError> {
        self.check_dim(v)?;
        let mut steps = Vec::new();
        let mut node = &self.root;
        while let NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } = &node.kind
        {
            let observed = v.get(*feature);
            let branch = if f64::from(observed) <= *threshold {
                Branch::Left
            } else {
                Branch::Right
            };
            steps.push(PathStep {
                feature: *feature,
                symbol: self.vocabulary.symbols()[*feature].display_path(),
                threshold: *threshold,
                observed,
                branch,
            });
            node = match branch {
                Branch::Left => left,
                Branch::Right => right,
            };
        }
        Ok(steps)
    }

    /// Follows the recorded branches from the root, checking each step
    /// against the tree and against `v`, and returns the leaf label reached.
    pub fn replay(&self, path: &[PathStep], v: &FeatureVector) -> Result<&str, ReplayError> {
        self.check_dim(v)?;
        let mut node = &self.root;
        for (i, step) in path.iter().enumerate() {
            let NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            } = &node.kind
            else {
                return Err(ReplayError::TooLong);
            };
            if step.feature != *feature || step.threshold != *threshold {
                return Err(ReplayError::FeatureMismatch(i));
            }
            if step.observed != v.get(*feature) {
                return Err(ReplayError::CountMismatch(i));
            }
            let goes_left = f64::from(step.observed) <= step.threshold;
            node = match (step.branch, goes_left) {
                (Branch::Left, true) => left,
                (Branch::Right, false) => right,
                _ => return Err(ReplayError::BranchMismatch(i)),
            };
        }
        if !node.is_leaf() {
            return Err(ReplayError::TooShort);
        }
        Ok(&self.classes()[node.label])
    }
}
