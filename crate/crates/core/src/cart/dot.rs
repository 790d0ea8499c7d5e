use std::fmt::Write;

use super::{DecisionTreeModel, NodeKind, TreeNode};

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering. Internal nodes read `count(<symbol>) ≤ <threshold>`
/// with the `true` edge on the left; leaves read `class=<label>`.
pub fn to_dot(model: &DecisionTreeModel) -> String {
    let mut out = String::from("digraph tree {\n  node [shape=box, style=rounded];\n");
    let mut next = 0;
    write_node(model, &model.root, &mut next, &mut out);
    out.push_str("}\n");
    out
}

fn write_node(
    model: &DecisionTreeModel,
    node: &TreeNode,
    next: &mut usize,
    out: &mut String,
) -> usize {
    let id = *next;
    *next += 1;
    match &node.kind {
        NodeKind::Leaf => {
            let label = format!("class={}", model.classes()[node.label]);
            let _ = writeln!(out, "  n{id} [label=\"{}\"];", escape(&label));
        }
        NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let symbol = model.vocabulary.symbols()[*feature].display_path();
            let label = format!("count({symbol}) ≤ {threshold}");
            let _ = writeln!(out, "  n{id} [label=\"{}\"];", escape(&label));
            let l = write_node(model, left, next, out);
            let r = write_node(model, right, next, out);
            let _ = writeln!(out, "  n{id} -> n{l} [label=\"true\"];");
            let _ = writeln!(out, "  n{id} -> n{r} [label=\"false\"];");
        }
    }
    id
}
