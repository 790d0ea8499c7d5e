//! Model persistence as canonical JSON.
//!
//! Canonical form: object keys sorted, two-space indentation, non-integral
//! numbers written with 12 significant digits, one trailing newline. Loading
//! a canonical file and saving it again reproduces it byte for byte.
//!
//! Tree nodes are stored in preorder. A split refers to its symbol by index
//! into the full vocabulary, so the file can be read without recomputing the
//! filter.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::cart::{ClassWeights, DecisionTreeModel, NodeKind, TreeNode, TreeParams};
use crate::pipeline::{ModelMetadata, TrainedModel};
use crate::symbols::Symbol;
use crate::vocab::Vocabulary;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model file: {0}")]
    Invalid(String),
    #[error("model file format version {0} is not supported")]
    UnsupportedVersion(u64),
    #[error("model file I/O: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(msg: impl Into<String>) -> ModelFileError {
    ModelFileError::Invalid(msg.into())
}

/// Formats like C's `%.12g`.
pub fn format_g12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (11 - exp) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Serializes `value` canonically. `serde_json::Map` keeps keys sorted.
pub fn to_canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(value: &Value, indent: usize, out: &mut String) {
    match value {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&value.to_string()),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => out.push_str(&u.to_string()),
            (None, Some(i)) => out.push_str(&i.to_string()),
            _ => out.push_str(&format_g12(n.as_f64().expect("finite number"))),
        },
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(indent + 1, out);
                write_value(item, indent + 1, out);
            }
            newline(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(indent + 1, out);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(item, indent + 1, out);
            }
            newline(indent, out);
            out.push('}');
        }
    }
}

fn newline(indent: usize, out: &mut String) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn number(v: f64) -> Value {
    // Integral values are written as integers so that they read back as
    // the same token.
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        if v >= 0.0 {
            json!(v as u64)
        } else {
            json!(v as i64)
        }
    } else {
        json!(v)
    }
}

fn numbers(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|&v| number(v)).collect())
}

pub fn model_to_value(model: &TrainedModel) -> Value {
    let full_index: Vec<usize> = model
        .kept
        .iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect();
    let mut nodes = Vec::new();
    push_nodes(&model.tree.root, model.classes(), &full_index, &mut nodes);
    let params = &model.tree.params;
    json!({
        "format_version": FORMAT_VERSION,
        "vocabulary": model.vocabulary.symbols().iter().map(Symbol::as_str).collect::<Vec<_>>(),
        "filter": { "tau": number(model.tau), "kept": model.kept },
        "classes": model.classes(),
        "class_weights": numbers(model.tree.weights.weights()),
        "params": {
            "max_depth": params.max_depth,
            "min_samples_leaf": params.min_samples_leaf,
            "ccp_alpha": number(params.ccp_alpha),
        },
        "nodes": nodes,
        "metadata": {
            "scenario": model.metadata.scenario,
            "manifest_digest": model.metadata.manifest_digest,
            "created_unix": model.metadata.created_unix,
        },
    })
}

fn push_nodes(node: &TreeNode, classes: &[String], full_index: &[usize], out: &mut Vec<Value>) {
    let mut obj = Map::new();
    obj.insert("distribution".into(), numbers(&node.distribution));
    obj.insert("samples".into(), json!(node.n_samples));
    obj.insert("label".into(), json!(classes[node.label]));
    match &node.kind {
        NodeKind::Leaf => out.push(Value::Object(obj)),
        NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            obj.insert("feature".into(), json!(full_index[*feature]));
            obj.insert("threshold".into(), number(*threshold));
            out.push(Value::Object(obj));
            push_nodes(left, classes, full_index, out);
            push_nodes(right, classes, full_index, out);
        }
    }
}

pub fn to_canonical_string(model: &TrainedModel) -> String {
    to_canonical_json(&model_to_value(model))
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ModelFileError> {
    fs::write(path, to_canonical_string(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ModelFileError> {
    from_json_str(&fs::read_to_string(path)?)
}

fn field<'a>(obj: &'a Value, key: &str) -> Result<&'a Value, ModelFileError> {
    obj.get(key)
        .ok_or_else(|| invalid(format!("missing '{key}'")))
}

fn as_f64(v: &Value, what: &str) -> Result<f64, ModelFileError> {
    v.as_f64()
        .ok_or_else(|| invalid(format!("'{what}' must be a number")))
}

fn as_usize(v: &Value, what: &str) -> Result<usize, ModelFileError> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| invalid(format!("'{what}' must be a non-negative integer")))
}

fn as_str<'a>(v: &'a Value, what: &str) -> Result<&'a str, ModelFileError> {
    v.as_str()
        .ok_or_else(|| invalid(format!("'{what}' must be a string")))
}

fn as_array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>, ModelFileError> {
    v.as_array()
        .ok_or_else(|| invalid(format!("'{what}' must be an array")))
}

fn opt<T>(
    v: &Value,
    what: &str,
    f: impl Fn(&Value, &str) -> Result<T, ModelFileError>,
) -> Result<Option<T>, ModelFileError> {
    if v.is_null() {
        Ok(None)
    } else {
        f(v, what).map(Some)
    }
}

pub fn from_json_str(text: &str) -> Result<TrainedModel, ModelFileError> {
    let root: Value = serde_json::from_str(text)?;
    let version = field(&root, "format_version")?
        .as_u64()
        .ok_or_else(|| invalid("'format_version' must be an integer"))?;
    if version != FORMAT_VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }

    let symbols = as_array(field(&root, "vocabulary")?, "vocabulary")?
        .iter()
        .map(|v| {
            let s = as_str(v, "vocabulary")?;
            Symbol::parse(s).map_err(|e| invalid(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if symbols.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("vocabulary must be strictly increasing"));
    }
    let vocabulary = Vocabulary::from_symbols(symbols);

    let filter = field(&root, "filter")?;
    let tau = as_f64(field(filter, "tau")?, "tau")?;
    let kept = as_array(field(filter, "kept")?, "kept")?
        .iter()
        .map(|v| {
            v.as_bool()
                .ok_or_else(|| invalid("'kept' entries must be booleans"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if kept.len() != vocabulary.len() {
        return Err(invalid("'kept' length differs from the vocabulary"));
    }
    let kept_vocab = vocabulary.restrict(&kept);
    let mut filtered_index = vec![None; kept.len()];
    for (j, i) in kept
        .iter()
        .enumerate()
        .filter(|(_, &k)| k)
        .map(|(i, _)| i)
        .enumerate()
    {
        filtered_index[i] = Some(j);
    }

    let classes = as_array(field(&root, "classes")?, "classes")?
        .iter()
        .map(|v| as_str(v, "classes").map(str::to_string))
        .collect::<Result<Vec<_>, _>>()?;
    let weights = as_array(field(&root, "class_weights")?, "class_weights")?
        .iter()
        .map(|v| as_f64(v, "class_weights"))
        .collect::<Result<Vec<_>, _>>()?;
    if classes.is_empty() || classes.len() != weights.len() {
        return Err(invalid(
            "'classes' and 'class_weights' must be non-empty and of equal length",
        ));
    }

    let p = field(&root, "params")?;
    let params = TreeParams {
        max_depth: opt(field(p, "max_depth")?, "max_depth", as_usize)?,
        min_samples_leaf: as_usize(field(p, "min_samples_leaf")?, "min_samples_leaf")?,
        ccp_alpha: as_f64(field(p, "ccp_alpha")?, "ccp_alpha")?,
    };

    let nodes = as_array(field(&root, "nodes")?, "nodes")?;
    let mut cursor = 0;
    let tree_root = read_node(nodes, &mut cursor, &classes, &filtered_index)?;
    if cursor != nodes.len() {
        return Err(invalid("trailing tree nodes after the preorder walk"));
    }

    let m = field(&root, "metadata")?;
    let metadata = ModelMetadata {
        scenario: opt(field(m, "scenario")?, "scenario", |v, w| {
            as_str(v, w).map(str::to_string)
        })?,
        manifest_digest: opt(field(m, "manifest_digest")?, "manifest_digest", |v, w| {
            as_str(v, w).map(str::to_string)
        })?,
        created_unix: opt(field(m, "created_unix")?, "created_unix", |v, w| {
            v.as_u64()
                .ok_or_else(|| invalid(format!("'{w}' must be an integer")))
        })?,
    };

    Ok(TrainedModel {
        vocabulary,
        kept,
        tau,
        tree: DecisionTreeModel {
            root: tree_root,
            vocabulary: kept_vocab,
            weights: ClassWeights::from_parts(classes, weights),
            params,
        },
        metadata,
    })
}

fn read_node(
    nodes: &[Value],
    cursor: &mut usize,
    classes: &[String],
    filtered_index: &[Option<usize>],
) -> Result<TreeNode, ModelFileError> {
    let node = nodes
        .get(*cursor)
        .ok_or_else(|| invalid("tree ends before every split has two children"))?;
    *cursor += 1;
    let distribution = as_array(field(node, "distribution")?, "distribution")?
        .iter()
        .map(|v| as_f64(v, "distribution"))
        .collect::<Result<Vec<_>, _>>()?;
    if distribution.len() != classes.len() {
        return Err(invalid(
            "node distribution length differs from the class count",
        ));
    }
    let label_name = as_str(field(node, "label")?, "label")?;
    let label = classes
        .iter()
        .position(|c| c == label_name)
        .ok_or_else(|| invalid(format!("node label '{label_name}' is not a class")))?;
    let n_samples = as_usize(field(node, "samples")?, "samples")?;
    let kind = match node.get("feature") {
        None => NodeKind::Leaf,
        Some(f) => {
            let full = as_usize(f, "feature")?;
            let feature = filtered_index
                .get(full)
                .copied()
                .flatten()
                .ok_or_else(|| invalid(format!("split feature {full} is not a kept symbol")))?;
            let threshold = as_f64(field(node, "threshold")?, "threshold")?;
            let left = read_node(nodes, cursor, classes, filtered_index)?;
            let right = read_node(nodes, cursor, classes, filtered_index)?;
            NodeKind::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    };
    Ok(TreeNode {
        distribution,
        n_samples,
        label,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llr::LabeledMultiset;
    use crate::pipeline::{train_model, TrainConfig};
    use crate::symbols::SymbolMultiset;

    #[test]
    fn g12_matches_printf() {
        // Expected strings are what C's printf("%.12g") produces.
        let cases = [
            (0.5, "0.5"),
            (1.0, "1"),
            (1.0 / 3.0, "0.333333333333"),
            (4.0 / 3.0, "1.33333333333"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (1e300, "1e+300"),
            (0.1 + 0.2, "0.3"),
            (2.0 / 3.0, "0.666666666667"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g12(v), want, "{v}");
        }
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let v = json!({"b": 1, "a": [true, null, 0.25], "c": {}});
        assert_eq!(
            to_canonical_json(&v),
            "{\n  \"a\": [\n    true,\n    null,\n    0.25\n  ],\n  \"b\": 1,\n  \"c\": {}\n}\n"
        );
    }

    fn corpus() -> Vec<LabeledMultiset> {
        let mut out = Vec::new();
        for (i, label) in ["A", "A", "A", "B", "B"].iter().enumerate() {
            let mut ms = SymbolMultiset::new(format!("s{i}"));
            ms.insert(Symbol::parse("ftyp/@majorBrand").unwrap());
            if *label == "B" {
                ms.add(
                    Symbol::parse("moov/udta/XMP_/@stuff").unwrap(),
                    1 + i as u32 % 2,
                );
            }
            if i % 2 == 0 {
                ms.insert(Symbol::parse("moov/mvhd/@rate/1").unwrap());
            }
            out.push(LabeledMultiset {
                symbols: ms,
                label: label.to_string(),
            });
        }
        out
    }

    #[test]
    fn save_load_save_is_identical() {
        let mut model = train_model(&corpus(), &TrainConfig::default())
            .unwrap()
            .model;
        model.metadata.scenario = Some("integrity".into());
        model.metadata.created_unix = Some(1_700_000_000);
        let first = to_canonical_string(&model);
        let loaded = from_json_str(&first).unwrap();
        assert_eq!(to_canonical_string(&loaded), first);
        assert_eq!(loaded.tree.root.node_count(), model.tree.root.node_count());
        for s in corpus() {
            assert_eq!(
                loaded.predict(&s.symbols).unwrap(),
                model.predict(&s.symbols).unwrap()
            );
        }
    }

    #[test]
    fn split_feature_indexes_full_vocabulary() {
        let model = train_model(&corpus(), &TrainConfig::default())
            .unwrap()
            .model;
        let v = model_to_value(&model);
        let feature = v["nodes"][0]["feature"].as_u64().unwrap() as usize;
        assert_eq!(v["vocabulary"][feature], "moov/udta/XMP_/@stuff");
    }

    #[test]
    fn rejects_unkept_split_feature() {
        let model = train_model(&corpus(), &TrainConfig::default())
            .unwrap()
            .model;
        let mut v = model_to_value(&model);
        v["nodes"][0]["feature"] = json!(0);
        assert!(matches!(
            from_json_str(&to_canonical_json(&v)),
            Err(ModelFileError::Invalid(_))
        ));
    }

    #[test]
    fn rejects_other_versions() {
        let model = train_model(&corpus(), &TrainConfig::default())
            .unwrap()
            .model;
        let mut v = model_to_value(&model);
        v["format_version"] = json!(2);
        assert!(matches!(
            from_json_str(&to_canonical_json(&v)),
            Err(ModelFileError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn truncated_preorder_is_rejected() {
        let model = train_model(&corpus(), &TrainConfig::default())
            .unwrap()
            .model;
        let mut v = model_to_value(&model);
        v["nodes"].as_array_mut().unwrap().pop();
        assert!(from_json_str(&to_canonical_json(&v)).is_err());
    }
}
