//! Dataset manifests, scenario labels and leave-one-device-out evaluation.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bmff::{parse_file, ParseError};
use crate::llr::LabeledMultiset;
use crate::pipeline::{train_model, PipelineError, TrainConfig, TrainedModel};
use crate::symbols::{extract_symbols, FieldBlacklist, SymbolMultiset};

pub const MANIFEST_HEADER: [&str; 5] = ["file", "device", "os", "software", "platform"];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("MalformedRow: line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("UnknownEnum: line {line}: '{value}' is not a valid {column}")]
    UnknownEnum {
        line: u64,
        column: &'static str,
        value: String,
    },
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("EmptyScenario: no manifest row belongs to scenario '{0}'")]
    EmptyScenario(String),
    #[error("SingleDevice: leave-one-device-out needs at least two devices, found {0}")]
    SingleDevice(usize),
    #[error("EmptyMatrix: confusion matrix has no samples")]
    EmptyMatrix,
    #[error("UnknownScenario: '{0}' (expected integrity, software, software_os, social_integrity(<platform>) or blind)")]
    UnknownScenario(String),
    #[error("cannot parse '{}': {source}", file.display())]
    Parse { file: PathBuf, source: ParseError },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

macro_rules! manifest_enum {
    ($name:ident, $column:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            /// Spelling used in manifests.
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            const COLUMN: &'static str = $column;
        }

        impl FromStr for $name {
            type Err = ();

            /// Case-insensitive.
            fn from_str(s: &str) -> Result<Self, ()> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str().eq_ignore_ascii_case(s))
                    .ok_or(())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

manifest_enum!(Os, "os", { Android => "Android", Ios => "iOS" });
manifest_enum!(Software, "software", {
    None => "none",
    Avidemux => "avidemux",
    Exiftool => "exiftool",
    Ffmpeg => "ffmpeg",
    Kdenlive => "kdenlive",
    Premiere => "premiere",
});
manifest_enum!(Platform, "platform", {
    None => "none",
    Facebook => "facebook",
    Tiktok => "tiktok",
    Weibo => "weibo",
    Youtube => "youtube",
});

impl Software {
    /// Class name in the software scenario.
    pub fn class_name(self) -> &'static str {
        match self {
            Software::None => "Native",
            Software::Avidemux => "Avidemux",
            Software::Exiftool => "Exiftool",
            Software::Ffmpeg => "ffmpeg",
            Software::Kdenlive => "Kdenlive",
            Software::Premiere => "Premiere",
        }
    }

    /// Suffix in software-and-OS class names (`iOS-exiftool`).
    pub fn os_suffix(self) -> &'static str {
        match self {
            Software::None => "native",
            other => other.as_str(),
        }
    }
}

impl Platform {
    pub fn class_name(self) -> &'static str {
        match self {
            Platform::None => "none",
            Platform::Facebook => "Facebook",
            Platform::Tiktok => "TikTok",
            Platform::Weibo => "Weibo",
            Platform::Youtube => "YouTube",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    /// Line number in the manifest (the header is line 1).
    pub line: u64,
    pub file: PathBuf,
    pub device: String,
    pub os: Os,
    pub software: Software,
    pub platform: Platform,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    pub line: u64,
    pub file: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
    /// Rows dropped because their file does not exist.
    pub missing: Vec<SkippedRow>,
}

impl DatasetManifest {
    pub fn devices(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.device.as_str()).collect()
    }
}

/// Reads a manifest file. Relative paths resolve against the manifest's
/// directory; rows whose file is missing are skipped with a warning.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, ManifestError> {
    let file = std::fs::File::open(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut manifest = parse_manifest(file, base)?;
    let (present, missing): (Vec<_>, Vec<_>) =
        manifest.rows.into_iter().partition(|r| r.file.is_file());
    for row in &missing {
        log::warn!(
            "MissingFile: line {}: '{}' skipped",
            row.line,
            row.file.display()
        );
    }
    manifest.rows = present;
    manifest.missing = missing
        .into_iter()
        .map(|r| SkippedRow {
            line: r.line,
            file: r.file,
        })
        .collect();
    Ok(manifest)
}

/// Parses manifest CSV without touching the file system.
pub fn parse_manifest<R: Read>(
    reader: R,
    base_dir: &Path,
) -> Result<DatasetManifest, ManifestError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(ManifestError::MalformedRow {
            line: 1,
            reason: format!("header must be '{}'", MANIFEST_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let fallback = i as u64 + 2;
        let record = record.map_err(|e| csv_error(e, fallback))?;
        let line = record.position().map_or(fallback, |p| p.line());
        if record.len() != MANIFEST_HEADER.len() {
            return Err(ManifestError::MalformedRow {
                line,
                reason: format!(
                    "expected {} fields, found {}",
                    MANIFEST_HEADER.len(),
                    record.len()
                ),
            });
        }
        if record[0].is_empty() || record[1].is_empty() {
            return Err(ManifestError::MalformedRow {
                line,
                reason: "file and device must be non-empty".to_string(),
            });
        }
        rows.push(ManifestRow {
            line,
            file: base_dir.join(&record[0]),
            device: record[1].to_string(),
            os: enum_field(&record[2], line)?,
            software: enum_field(&record[3], line)?,
            platform: enum_field(&record[4], line)?,
        });
    }
    Ok(DatasetManifest {
        rows,
        missing: Vec::new(),
    })
}

trait ManifestColumn: FromStr<Err = ()> {
    const NAME: &'static str;
}
impl ManifestColumn for Os {
    const NAME: &'static str = Os::COLUMN;
}
impl ManifestColumn for Software {
    const NAME: &'static str = Software::COLUMN;
}
impl ManifestColumn for Platform {
    const NAME: &'static str = Platform::COLUMN;
}

fn enum_field<T: ManifestColumn>(value: &str, line: u64) -> Result<T, ManifestError> {
    value.parse().map_err(|()| ManifestError::UnknownEnum {
        line,
        column: T::NAME,
        value: value.to_string(),
    })
}

fn csv_error(e: csv::Error, fallback: u64) -> ManifestError {
    let line = e.position().map_or(fallback, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ManifestError::Io(io),
        other => ManifestError::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Integrity,
    Software,
    SoftwareOs,
    SocialIntegrity(Platform),
    Blind,
}

impl FromStr for Scenario {
    type Err = EvalError;

    /// Accepts `social_integrity(youtube)` and `social_integrity:youtube`.
    fn from_str(s: &str) -> Result<Self, EvalError> {
        let unknown = || EvalError::UnknownScenario(s.to_string());
        match s {
            "integrity" => return Ok(Scenario::Integrity),
            "software" => return Ok(Scenario::Software),
            "software_os" => return Ok(Scenario::SoftwareOs),
            "blind" => return Ok(Scenario::Blind),
            _ => {}
        }
        let rest = s.strip_prefix("social_integrity").ok_or_else(unknown)?;
        let platform = rest
            .strip_prefix(':')
            .or_else(|| rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')))
            .ok_or_else(unknown)?;
        match platform.parse() {
            Ok(Platform::None) | Err(()) => Err(unknown()),
            Ok(p) => Ok(Scenario::SocialIntegrity(p)),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Integrity => f.write_str("integrity"),
            Scenario::Software => f.write_str("software"),
            Scenario::SoftwareOs => f.write_str("software_os"),
            Scenario::SocialIntegrity(p) => write!(f, "social_integrity({p})"),
            Scenario::Blind => f.write_str("blind"),
        }
    }
}

impl Scenario {
    /// Class of `row`, or `None` when the scenario excludes it.
    pub fn label(&self, row: &ManifestRow) -> Option<String> {
        let integrity = |r: &ManifestRow| {
            if r.software == Software::None {
                "Pristine".to_string()
            } else {
                "Tampered".to_string()
            }
        };
        let software_os = |r: &ManifestRow| format!("{}-{}", r.os, r.software.os_suffix());
        match (self, row.platform) {
            (Scenario::Integrity, Platform::None) => Some(integrity(row)),
            (Scenario::Software, Platform::None) => Some(row.software.class_name().to_string()),
            (Scenario::SoftwareOs, Platform::None) => Some(software_os(row)),
            (Scenario::SocialIntegrity(p), q) if *p == q => Some(integrity(row)),
            (Scenario::Blind, Platform::None) => Some(software_os(row)),
            (Scenario::Blind, p) => Some(p.class_name().to_string()),
            _ => None,
        }
    }

    /// Class reported as positive for TPR when the scenario has two classes.
    pub fn positive_class(&self) -> Option<&'static str> {
        match self {
            Scenario::Integrity | Scenario::SocialIntegrity(_) => Some("Pristine"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledRow {
    /// Index into the manifest rows.
    pub row: usize,
    pub label: String,
}

pub fn derive_labels(
    manifest: &DatasetManifest,
    scenario: &Scenario,
) -> Result<Vec<LabeledRow>, EvalError> {
    let out: Vec<_> = manifest
        .rows
        .iter()
        .enumerate()
        .filter_map(|(row, r)| scenario.label(r).map(|label| LabeledRow { row, label }))
        .collect();
    if out.is_empty() {
        return Err(EvalError::EmptyScenario(scenario.to_string()));
    }
    Ok(out)
}

/// One cross-validation fold; indices refer to the grouped items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub device: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// One fold per distinct group, in lexicographic group order.
pub fn group_folds<S: AsRef<str>>(groups: &[S]) -> Result<Vec<Fold>, EvalError> {
    let devices: BTreeSet<&str> = groups.iter().map(AsRef::as_ref).collect();
    if devices.len() < 2 {
        return Err(EvalError::SingleDevice(devices.len()));
    }
    Ok(devices
        .into_iter()
        .map(|d| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..groups.len()).partition(|&i| groups[i].as_ref() == d);
            Fold {
                device: d.to_string(),
                train,
                test,
            }
        })
        .collect())
}

/// Leave-one-device-out folds over the manifest rows.
pub fn lodo_folds(manifest: &DatasetManifest) -> Result<Vec<Fold>, EvalError> {
    let devices: Vec<&str> = manifest.rows.iter().map(|r| r.device.as_str()).collect();
    group_folds(&devices)
}

/// Raw-count confusion matrix; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        assert!(counts.len() == classes.len() && counts.iter().all(|r| r.len() == classes.len()));
        ConfusionMatrix { classes, counts }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn row_total(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn total(&self) -> u64 {
        (0..self.classes.len()).map(|c| self.row_total(c)).sum()
    }

    /// Recall of `class`, `None` if it has no samples.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let n = self.row_total(class);
        (n > 0).then(|| self.counts[class][class] as f64 / n as f64)
    }

    /// Row-normalized rates; rows of absent classes are `None`.
    pub fn rates(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.classes.len())
            .map(|c| {
                let n = self.row_total(c);
                (n > 0).then(|| {
                    self.counts[c]
                        .iter()
                        .map(|&x| x as f64 / n as f64)
                        .collect()
                })
            })
            .collect()
    }
}

/// Mean per-class recall over the classes that occur.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let recalls: Vec<f64> = (0..cm.classes.len()).filter_map(|c| cm.recall(c)).collect();
    if recalls.is_empty() {
        return Err(EvalError::EmptyMatrix);
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// A container's symbols with its class and source device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub device: String,
    pub labeled: LabeledMultiset,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldReport {
    pub device: String,
    pub n_train: usize,
    pub n_test: usize,
    pub balanced_accuracy: f64,
    /// Balanced accuracy of guessing among the fold model's classes. A
    /// single-class model is never flagged.
    pub chance_level: f64,
    pub at_chance: bool,
    /// Raw counts over the report's class list.
    pub counts: Vec<Vec<u64>>,
    pub kept_symbols: usize,
    pub tree_leaves: usize,
    pub train_seconds: f64,
    pub test_seconds: f64,
    pub explanations_verified: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoClassRates {
    pub positive: String,
    pub negative: String,
    pub tpr: f64,
    pub tnr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub scenario: String,
    pub classes: Vec<String>,
    pub folds: Vec<FoldReport>,
    /// Per-fold row-normalized rates averaged over the folds in which the
    /// row class occurs; `None` for classes that never occur.
    pub mean_confusion: Vec<Option<Vec<f64>>>,
    /// Mean of the fold balanced accuracies.
    pub global_balanced_accuracy: f64,
    pub rates: Option<TwoClassRates>,
    pub predictions: usize,
    pub explanations_verified: usize,
}

/// A report together with the model trained in each fold.
#[derive(Debug, Clone)]
pub struct EvaluationRun {
    pub report: EvaluationReport,
    pub models: Vec<TrainedModel>,
}

struct FoldOutcome {
    report: FoldReport,
    model: TrainedModel,
}

/// Leave-one-device-out evaluation over in-memory samples. Each fold sees
/// only its training samples when building the vocabulary, filter, weights
/// and tree.
pub fn evaluate_samples(
    samples: &[Sample],
    scenario: &str,
    positive: Option<&str>,
    cfg: &TrainConfig,
) -> Result<EvaluationRun, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyScenario(scenario.to_string()));
    }
    let classes: Vec<String> = samples
        .iter()
        .map(|s| s.labeled.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let devices: Vec<&str> = samples.iter().map(|s| s.device.as_str()).collect();
    let folds = group_folds(&devices)?;

    let outcomes = folds
        .par_iter()
        .map(|fold| run_fold(samples, fold, &classes, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let k = classes.len();
    let mut mean_confusion: Vec<Option<Vec<f64>>> = Vec::with_capacity(k);
    for c in 0..k {
        let rows: Vec<Vec<f64>> = outcomes
            .iter()
            .filter_map(|o| {
                let cm = ConfusionMatrix::from_counts(classes.clone(), o.report.counts.clone());
                cm.rates()[c].clone()
            })
            .collect();
        mean_confusion.push((!rows.is_empty()).then(|| {
            (0..k)
                .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
                .collect()
        }));
    }
    let global = outcomes
        .iter()
        .map(|o| o.report.balanced_accuracy)
        .sum::<f64>()
        / outcomes.len() as f64;

    let rates = if k == 2 {
        let p = positive
            .and_then(|p| classes.iter().position(|c| c == p))
            .unwrap_or(0);
        let n = 1 - p;
        let rate = |c: usize| mean_confusion[c].as_ref().map_or(f64::NAN, |r| r[c]);
        Some(TwoClassRates {
            positive: classes[p].clone(),
            negative: classes[n].clone(),
            tpr: rate(p),
            tnr: rate(n),
        })
    } else {
        None
    };

    let predictions = outcomes.iter().map(|o| o.report.n_test).sum();
    let explanations_verified = outcomes
        .iter()
        .map(|o| o.report.explanations_verified)
        .sum();
    let (folds, models) = outcomes.into_iter().map(|o| (o.report, o.model)).unzip();
    Ok(EvaluationRun {
        report: EvaluationReport {
            scenario: scenario.to_string(),
            classes,
            folds,
            mean_confusion,
            global_balanced_accuracy: global,
            rates,
            predictions,
            explanations_verified,
        },
        models,
    })
}

fn run_fold(
    samples: &[Sample],
    fold: &Fold,
    classes: &[String],
    cfg: &TrainConfig,
) -> Result<FoldOutcome, EvalError> {
    let train: Vec<LabeledMultiset> = fold
        .train
        .iter()
        .map(|&i| samples[i].labeled.clone())
        .collect();
    let started = Instant::now();
    let model = train_model(&train, cfg)?.model;
    let train_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let mut cm = ConfusionMatrix::new(classes.to_vec());
    let mut verified = 0;
    for &i in &fold.test {
        let sample = &samples[i].labeled;
        let predicted = model.predict(&sample.symbols)?;
        if matches!(model.classify(&sample.symbols), Ok(v) if v.label == predicted) {
            verified += 1;
        }
        let truth = classes
            .iter()
            .position(|c| *c == sample.label)
            .expect("class list covers samples");
        let pred = classes
            .iter()
            .position(|c| c == predicted)
            .expect("model classes are a subset");
        cm.record(truth, pred);
    }
    let test_seconds = started.elapsed().as_secs_f64();

    let ba = balanced_accuracy(&cm)?;
    let chance_level = 1.0 / model.classes().len() as f64;
    Ok(FoldOutcome {
        report: FoldReport {
            device: fold.device.clone(),
            n_train: fold.train.len(),
            n_test: fold.test.len(),
            balanced_accuracy: ba,
            chance_level,
            at_chance: model.classes().len() > 1 && ba <= chance_level + 1e-9,
            counts: cm.counts,
            kept_symbols: model.kept_vocabulary().len(),
            tree_leaves: model.tree.root.leaf_count(),
            train_seconds,
            test_seconds,
            explanations_verified: verified,
        },
        model,
    })
}

/// Parses every file and extracts its symbols, in parallel, preserving order.
pub fn load_symbols(
    files: &[&Path],
    blacklist: &FieldBlacklist,
) -> Result<Vec<SymbolMultiset>, EvalError> {
    files
        .par_iter()
        .map(|&file| {
            let tree = parse_file(file).map_err(|source| EvalError::Parse {
                file: file.to_path_buf(),
                source,
            })?;
            Ok(extract_symbols(&tree, blacklist))
        })
        .collect()
}

/// Samples of `manifest` that belong to `scenario`.
pub fn scenario_samples(
    manifest: &DatasetManifest,
    scenario: &Scenario,
    blacklist: &FieldBlacklist,
) -> Result<Vec<Sample>, EvalError> {
    let labeled = derive_labels(manifest, scenario)?;
    let files: Vec<&Path> = labeled
        .iter()
        .map(|l| manifest.rows[l.row].file.as_path())
        .collect();
    let symbols = load_symbols(&files, blacklist)?;
    Ok(labeled
        .into_iter()
        .zip(symbols)
        .map(|(l, symbols)| Sample {
            device: manifest.rows[l.row].device.clone(),
            labeled: LabeledMultiset {
                symbols,
                label: l.label,
            },
        })
        .collect())
}

pub fn run_scenario_detailed(
    manifest: &DatasetManifest,
    scenario: &Scenario,
    cfg: &TrainConfig,
    blacklist: &FieldBlacklist,
) -> Result<EvaluationRun, EvalError> {
    let samples = scenario_samples(manifest, scenario, blacklist)?;
    evaluate_samples(
        &samples,
        &scenario.to_string(),
        scenario.positive_class(),
        cfg,
    )
}

pub fn run_scenario(
    manifest: &DatasetManifest,
    scenario: &Scenario,
    cfg: &TrainConfig,
    blacklist: &FieldBlacklist,
) -> Result<EvaluationReport, EvalError> {
    run_scenario_detailed(manifest, scenario, cfg, blacklist).map(|r| r.report)
}

impl EvaluationReport {
    /// Per-device table, mean confusion matrix and, for two classes, the
    /// TPR/TNR line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.scenario);
        let _ = writeln!(out);
        let width = self
            .folds
            .iter()
            .map(|f| f.device.len())
            .max()
            .unwrap_or(0)
            .max(6);
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>5}  {:>8}  {:>8}  {:>7}  note",
            "device", "train", "test", "bal.acc", "train_s", "test_s"
        );
        for f in &self.folds {
            let _ = writeln!(
                out,
                "{:<width$}  {:>5}  {:>5}  {:>8.2}  {:>8.3}  {:>7.3}  {}",
                f.device,
                f.n_train,
                f.n_test,
                f.balanced_accuracy,
                f.train_seconds,
                f.test_seconds,
                if f.at_chance { "at chance" } else { "" }
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "global balanced accuracy: {:.2}",
            self.global_balanced_accuracy
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "mean confusion (rows true, columns predicted)");
        let cw = self
            .classes
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(5);
        let _ = write!(out, "{:<cw$}", "");
        for c in &self.classes {
            let _ = write!(out, "  {c:>cw$}");
        }
        let _ = writeln!(out);
        for (c, row) in self.classes.iter().zip(&self.mean_confusion) {
            let _ = write!(out, "{c:<cw$}");
            match row {
                Some(rates) => {
                    for r in rates {
                        let _ = write!(out, "  {r:>cw$.2}");
                    }
                }
                None => {
                    for _ in &self.classes {
                        let _ = write!(out, "  {:>cw$}", "-");
                    }
                }
            }
            let _ = writeln!(out);
        }
        if let Some(r) = &self.rates {
            let _ = writeln!(out);
            let _ = writeln!(out, "TPR ({}): {:.2}", r.positive, r.tpr);
            let _ = writeln!(out, "TNR ({}): {:.2}", r.negative, r.tnr);
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "explanations verified: {}/{}",
            self.explanations_verified, self.predictions
        );
        out
    }
}
