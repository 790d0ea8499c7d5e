use std::fmt::Write;

use serde::Serialize;

use super::{AtomNode, ContainerTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Text,
    Json,
}

#[derive(Serialize)]
struct JsonTree<'a> {
    source: &'a str,
    children: Vec<JsonNode<'a>>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct JsonField<'a> {
    name: &'a str,
    value: &'a str,
}

#[derive(Serialize)]
struct JsonNode<'a> {
    #[serde(rename = "type")]
    kind: String,
    offset: u64,
    size: u64,
    fields: Vec<JsonField<'a>>,
    children: Vec<JsonNode<'a>>,
}

impl<'a> JsonNode<'a> {
    fn new(node: &'a AtomNode) -> Self {
        JsonNode {
            kind: node.name(),
            offset: node.header.offset,
            size: node.header.extent,
            fields: node
                .fields
                .iter()
                .map(|(name, value)| JsonField { name, value })
                .collect(),
            children: node.children.iter().map(JsonNode::new).collect(),
        }
    }
}

/// Renders a tree. Text output indents two spaces per level, fields
/// (`@name: value`) before child atoms; the synthetic root is not printed.
pub fn dump_tree(tree: &ContainerTree, format: DumpFormat) -> String {
    match format {
        DumpFormat::Text => {
            let mut out = String::new();
            for node in tree.top_level() {
                write_text(&mut out, node, 0);
            }
            out
        }
        DumpFormat::Json => {
            let doc = JsonTree {
                source: &tree.source_id,
                children: tree.top_level().iter().map(JsonNode::new).collect(),
                warnings: tree.warnings.iter().map(|w| w.to_string()).collect(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("tree serializes");
            s.push('\n');
            s
        }
    }
}

fn write_text(out: &mut String, node: &AtomNode, depth: usize) {
    let indent = "  ".repeat(depth);
    let _ = writeln!(out, "{indent}{}", node.name());
    for (name, value) in &node.fields {
        let _ = writeln!(out, "{indent}  @{name}: {value}");
    }
    for child in &node.children {
        write_text(out, child, depth + 1);
    }
}
