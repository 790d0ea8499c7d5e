//! Minimal cost-complexity pruning.
//!
//! The resubstitution cost of a node is its weighted misclassified mass
//! divided by the root mass. The effective alpha of an internal node `t` is
//! `(R(t) - R(T_t)) / (|leaves(T_t)| - 1)`; the weakest link (smallest
//! effective alpha, first in preorder on ties) is collapsed repeatedly while
//! its alpha is at most `ccp_alpha`.

use super::{NodeKind, TreeNode};

/// Cost of turning `node` into a leaf.
fn leaf_cost(node: &TreeNode, total: f64) -> f64 {
    let mass: f64 = node.distribution.iter().sum();
    (mass - node.distribution[node.label]).max(0.0) / total
}

/// `(subtree cost, leaf count)`.
fn subtree_cost(node: &TreeNode, total: f64) -> (f64, usize) {
    match &node.kind {
        NodeKind::Leaf => (leaf_cost(node, total), 1),
        NodeKind::Split { left, right, .. } => {
            let (cl, nl) = subtree_cost(left, total);
            let (cr, nr) = subtree_cost(right, total);
            (cl + cr, nl + nr)
        }
    }
}

/// Effective alpha of every internal node, in preorder.
pub fn effective_alphas(tree: &TreeNode) -> Vec<f64> {
    let total: f64 = tree.distribution.iter().sum();
    let mut out = Vec::new();
    collect(tree, total, &mut out);
    out
}

fn collect(node: &TreeNode, total: f64, out: &mut Vec<f64>) {
    if let NodeKind::Split { left, right, .. } = &node.kind {
        let (cost, leaves) = subtree_cost(node, total);
        let g = ((leaf_cost(node, total) - cost) / (leaves as f64 - 1.0)).max(0.0);
        out.push(g);
        collect(left, total, out);
        collect(right, total, out);
    }
}

fn collapse_nth(node: &mut TreeNode, target: usize, counter: &mut usize) -> bool {
    if node.is_leaf() {
        return false;
    }
    if *counter == target {
        node.kind = NodeKind::Leaf;
        return true;
    }
    *counter += 1;
    if let NodeKind::Split { left, right, .. } = &mut node.kind {
        collapse_nth(left, target, counter) || collapse_nth(right, target, counter)
    } else {
        false
    }
}

/// Returns the pruned copy of `tree`; `ccp_alpha <= 0` returns it unchanged.
pub fn prune(tree: &TreeNode, ccp_alpha: f64) -> TreeNode {
    let mut tree = tree.clone();
    if ccp_alpha <= 0.0 || ccp_alpha.is_nan() {
        return tree;
    }
    loop {
        let alphas = effective_alphas(&tree);
        let Some((weakest, &g)) = alphas
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        else {
            break;
        };
        if g > ccp_alpha {
            break;
        }
        collapse_nth(&mut tree, weakest, &mut 0);
    }
    tree
}
