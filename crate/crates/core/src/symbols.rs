//! Field-symbols and value-symbols extracted from a container tree.
//!
//! A field-symbol is the slash-joined path from below the root to a field,
//! with the field segment prefixed by `@` (`moov/mvhd/@duration`). A
//! value-symbol appends the field value as a final segment
//! (`moov/mvhd/@duration/73432`). Sibling atoms with the same type share
//! paths; multiplicity is carried by counts.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::bmff::{AtomNode, ContainerTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolKind {
    Field,
    Value,
}

impl SymbolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SymbolKind::Field => "field",
            SymbolKind::Value => "value",
        }
    }
}

/// A symbol in canonical string form. Ordering and equality follow the
/// canonical string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Symbol {
    canonical: String,
    kind: SymbolKind,
    /// Byte length of the field-path prefix inside `canonical`.
    field_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed symbol '{0}'")]
pub struct SymbolParseError(pub String);

impl Symbol {
    pub fn field(atom_path: &[String], field: &str) -> Self {
        let mut canonical = atom_path.join("/");
        if !canonical.is_empty() {
            canonical.push('/');
        }
        canonical.push('@');
        canonical.push_str(field);
        Symbol {
            field_len: canonical.len(),
            canonical,
            kind: SymbolKind::Field,
        }
    }

    /// Value-symbol for the field-symbol `field`.
    pub fn with_value(field: &Symbol, value: &str) -> Self {
        let prefix = field.field_path();
        let mut canonical = String::with_capacity(prefix.len() + value.len() + 1);
        canonical.push_str(prefix);
        canonical.push('/');
        canonical.push_str(&escape_value(value));
        Symbol {
            field_len: prefix.len(),
            canonical,
            kind: SymbolKind::Value,
        }
    }

    /// Parses a canonical symbol string.
    pub fn parse(s: &str) -> Result<Self, SymbolParseError> {
        // The field segment is the first one starting with '@'; atom names
        // never start with '@' because the type-code rendering escapes it.
        let mut start = 0;
        loop {
            if s[start..].starts_with('@') {
                break;
            }
            match s[start..].find('/') {
                Some(i) => start += i + 1,
                None => return Err(SymbolParseError(s.to_string())),
            }
        }
        let field_end = s[start..].find('/').map(|i| start + i);
        match field_end {
            None if s.len() > start + 1 => Ok(Symbol {
                canonical: s.to_string(),
                kind: SymbolKind::Field,
                field_len: s.len(),
            }),
            Some(end) if end > start + 1 => {
                unescape_value(&s[end + 1..]).ok_or_else(|| SymbolParseError(s.to_string()))?;
                Ok(Symbol {
                    canonical: s.to_string(),
                    kind: SymbolKind::Value,
                    field_len: end,
                })
            }
            _ => Err(SymbolParseError(s.to_string())),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.canonical
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    /// The field-symbol path, value excluded.
    pub fn field_path(&self) -> &str {
        &self.canonical[..self.field_len]
    }

    /// Terminal field name including the `@` prefix.
    pub fn field_name(&self) -> &str {
        let path = self.field_path();
        let at = path
            .rfind('@')
            .expect("symbols always contain a field segment");
        &path[at..]
    }

    /// Unescaped value of a value-symbol.
    pub fn value(&self) -> Option<String> {
        match self.kind {
            SymbolKind::Field => None,
            SymbolKind::Value => unescape_value(&self.canonical[self.field_len + 1..]),
        }
    }

    /// Path as shown in explanations, anchored at the visual `root` node.
    pub fn display_path(&self) -> String {
        format!("root/{}", self.canonical)
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical.cmp(&other.canonical)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

fn escape_value(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '/' => out.push_str("\\/"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_value(escaped: &str) -> Option<String> {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next()? {
                c @ ('\\' | '/') => out.push(c),
                _ => return None,
            },
            '/' => return None,
            c => out.push(c),
        }
    }
    Some(out)
}

/// Occurrence counts of the symbols of one container.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolMultiset {
    entries: BTreeMap<Symbol, u32>,
    pub source_id: String,
}

impl SymbolMultiset {
    pub fn new(source_id: impl Into<String>) -> Self {
        SymbolMultiset {
            entries: BTreeMap::new(),
            source_id: source_id.into(),
        }
    }

    pub fn insert(&mut self, symbol: Symbol) {
        self.add(symbol, 1);
    }

    /// Adds `count` occurrences; a zero count is ignored.
    pub fn add(&mut self, symbol: Symbol, count: u32) {
        if count > 0 {
            *self.entries.entry(symbol).or_insert(0) += count;
        }
    }

    pub fn count(&self, symbol: &Symbol) -> u32 {
        self.entries.get(symbol).copied().unwrap_or(0)
    }

    pub fn contains(&self, symbol: &Symbol) -> bool {
        self.entries.contains_key(symbol)
    }

    /// Entries in lexicographic symbol order.
    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, u32)> {
        self.entries.iter().map(|(s, &c)| (s, c))
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.entries.keys()
    }

    /// Number of distinct symbols.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of all counts.
    pub fn total(&self) -> u64 {
        self.entries.values().map(|&c| u64::from(c)).sum()
    }

    /// One line per symbol: `<count>\t<kind>\t<path>`, lexicographic order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (symbol, count) in self.iter() {
            out.push_str(&format!("{count}\t{}\t{symbol}\n", symbol.kind().as_str()));
        }
        out
    }
}

/// `@`-prefixed field names whose value-symbols are suppressed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FieldBlacklist {
    field_names: BTreeSet<String>,
}

impl FieldBlacklist {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Accepts names with or without the leading `@`.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let field_names = names
            .into_iter()
            .map(|n| {
                let n = n.as_ref();
                if n.starts_with('@') {
                    n.to_string()
                } else {
                    format!("@{n}")
                }
            })
            .collect();
        FieldBlacklist { field_names }
    }

    pub fn contains(&self, field_name: &str) -> bool {
        self.field_names.contains(field_name)
    }

    pub fn remove(&mut self, field_name: &str) -> bool {
        self.field_names.remove(field_name)
    }

    pub fn len(&self) -> usize {
        self.field_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field_names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.field_names.iter().map(String::as_str)
    }
}

/// Fields whose values carry only per-video variation (timing, geometry,
/// sizes, device identity strings).
pub fn default_blacklist() -> FieldBlacklist {
    FieldBlacklist::from_names([
        "author",
        "count",
        "creationTime",
        "depth",
        "duration",
        "entryCount",
        "entryCount",
        "flags",
        "gpscoords",
        "matrix",
        "modelName",
        "modificationTime",
        "name",
        "sampleCount",
        "segmentDuration",
        "size",
        "stuff",
        "timescale",
        "version",
        "width",
        "height",
        "language",
    ])
}

/// Symbol multiset of a container. Every field yields its field-symbol;
/// the value-symbol is added unless the field is blacklisted.
pub fn extract_symbols(tree: &ContainerTree, blacklist: &FieldBlacklist) -> SymbolMultiset {
    let mut out = SymbolMultiset::new(tree.source_id.clone());
    let mut path = Vec::new();
    for node in tree.top_level() {
        visit(node, &mut path, blacklist, &mut out);
    }
    out
}

fn visit(
    node: &AtomNode,
    path: &mut Vec<String>,
    blacklist: &FieldBlacklist,
    out: &mut SymbolMultiset,
) {
    path.push(node.name());
    for (name, value) in &node.fields {
        let field = Symbol::field(path, name);
        if !blacklist.contains(field.field_name()) {
            out.insert(Symbol::with_value(&field, value));
        }
        out.insert(field);
    }
    for child in &node.children {
        visit(child, path, blacklist, out);
    }
    path.pop();
}
