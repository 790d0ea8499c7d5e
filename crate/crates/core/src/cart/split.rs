use rayon::prelude::*;

use super::{argmax_class, gini_unchecked, NodeKind, TreeNode, TreeParams};

/// Decreases closer than this are treated as ties.
pub const TIE_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature_index: usize,
    /// Samples with `count <= threshold` go left.
    pub threshold: f64,
    pub weighted_gini_decrease: f64,
}

/// Best split over all features and all midpoints between consecutive
/// distinct observed counts. `labels[i]` indexes `class_weights`.
///
/// The decrease is `G(parent) - W_l/W * G(left) - W_r/W * G(right)` on
/// weighted class masses. Candidates are scanned in (feature, threshold)
/// order and one replaces the incumbent only when it is better by more
/// than [`TIE_EPSILON`]; `None` when no candidate has positive decrease.
pub fn best_split(
    rows: &[Vec<u32>],
    labels: &[usize],
    class_weights: &[f64],
    min_samples_leaf: usize,
) -> Option<SplitCandidate> {
    if rows.is_empty() {
        return None;
    }
    let columns: Vec<Vec<u32>> = (0..rows[0].len())
        .map(|f| rows.iter().map(|r| r[f]).collect())
        .collect();
    let params = TreeParams {
        min_samples_leaf,
        ..TreeParams::default()
    };
    let grower = Grower {
        columns: &columns,
        labels,
        class_weights,
        params: &params,
    };
    let idx: Vec<usize> = (0..rows.len()).collect();
    let masses = grower.masses(&idx);
    grower.search(&idx, &masses)
}

pub(super) struct Grower<'a> {
    pub columns: &'a [Vec<u32>],
    pub labels: &'a [usize],
    pub class_weights: &'a [f64],
    pub params: &'a TreeParams,
}

impl Grower<'_> {
    fn masses(&self, idx: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.class_weights.len()];
        for &i in idx {
            m[self.labels[i]] += self.class_weights[self.labels[i]];
        }
        m
    }

    pub fn build(&self, idx: Vec<usize>, depth: usize) -> TreeNode {
        let masses = self.masses(&idx);
        let n = idx.len();
        let first = self.labels[idx[0]];
        let pure = idx.iter().all(|&i| self.labels[i] == first);
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || n < 2 || depth_capped || n < 2 * self.params.min_samples_leaf.max(1) {
            return TreeNode::leaf(masses, n);
        }
        let Some(split) = self.search(&idx, &masses) else {
            return TreeNode::leaf(masses, n);
        };
        let column = &self.columns[split.feature_index];
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| f64::from(column[i]) <= split.threshold);
        let left = self.build(left, depth + 1);
        let right = self.build(right, depth + 1);
        TreeNode {
            label: argmax_class(&masses),
            distribution: masses,
            n_samples: n,
            kind: NodeKind::Split {
                feature: split.feature_index,
                threshold: split.threshold,
                left: Box::new(left),
                right: Box::new(right),
            },
        }
    }

    pub fn search(&self, idx: &[usize], masses: &[f64]) -> Option<SplitCandidate> {
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let parent = gini_unchecked(masses, total);
        let per_feature: Vec<Vec<(f64, f64)>> = self
            .columns
            .par_iter()
            .map(|column| self.feature_candidates(column, idx, masses, total, parent))
            .collect();

        let mut best: Option<SplitCandidate> = None;
        let mut best_decrease = 0.0;
        for (feature, candidates) in per_feature.into_iter().enumerate() {
            for (threshold, decrease) in candidates {
                if decrease > best_decrease + TIE_EPSILON {
                    best_decrease = decrease;
                    best = Some(SplitCandidate {
                        feature_index: feature,
                        threshold,
                        weighted_gini_decrease: decrease,
                    });
                }
            }
        }
        best
    }

    /// `(threshold, decrease)` for every admissible midpoint, ascending.
    fn feature_candidates(
        &self,
        column: &[u32],
        idx: &[usize],
        masses: &[f64],
        total: f64,
        parent: f64,
    ) -> Vec<(f64, f64)> {
        let first = column[idx[0]];
        if idx.iter().all(|&i| column[i] == first) {
            return Vec::new();
        }
        let mut pairs: Vec<(u32, usize)> =
            idx.iter().map(|&i| (column[i], self.labels[i])).collect();
        pairs.sort_unstable();

        let n = pairs.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut left = vec![0.0; masses.len()];
        let mut right = vec![0.0; masses.len()];
        let mut out = Vec::new();
        for i in 0..n - 1 {
            let (value, label) = pairs[i];
            left[label] += self.class_weights[label];
            let next = pairs[i + 1].0;
            if value == next {
                continue;
            }
            let n_left = i + 1;
            if n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let w_left: f64 = left.iter().sum();
            for (r, (m, l)) in right.iter_mut().zip(masses.iter().zip(&left)) {
                *r = (m - l).max(0.0);
            }
            let w_right: f64 = right.iter().sum();
            if w_left <= 0.0 || w_right <= 0.0 {
                continue;
            }
            let decrease = parent
                - (w_left / total) * gini_unchecked(&left, w_left)
                - (w_right / total) * gini_unchecked(&right, w_right);
            out.push(((f64::from(value) + f64::from(next)) / 2.0, decrease));
        }
        out
    }
}
