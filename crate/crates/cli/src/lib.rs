//! The `cfx` command line. [`run`] executes one invocation against the
//! given output streams and returns the process exit code.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use container_forensics::bmff::{dump_tree, parse_file, DumpFormat};
use container_forensics::cart::{to_dot, PathStep, TreeParams};
use container_forensics::evaluation::{
    evaluate_samples, load_manifest, scenario_samples, DatasetManifest, EvalError, Sample, Scenario,
};
use container_forensics::llr::{
    class_frequency, score_vocabulary, FilterConfig, LabeledMultiset, DEFAULT_TAU,
};
use container_forensics::model_file::{load_model, to_canonical_string};
use container_forensics::pipeline::{train_model, TrainConfig, TrainedModel};
use container_forensics::symbols::{default_blacklist, extract_symbols};
use container_forensics::synth::{generate_corpus, FixtureSpec};
use container_forensics::vocab::build_vocabulary;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

#[derive(Debug, Parser)]
#[command(name = "cfx", version, about = "Video container structure forensics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the box tree or the symbols of one file.
    Parse {
        file: PathBuf,
        /// Print the symbol multiset.
        #[arg(long, conflicts_with = "tree")]
        symbols: bool,
        /// Print the box tree (the default).
        #[arg(long)]
        tree: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Train a model on every row of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        scenario: String,
        #[command(flatten)]
        hyper: Hyper,
        #[arg(long)]
        out: PathBuf,
        /// Also write the tree in Graphviz format.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Classify files with a trained model, one JSON line per file.
    Classify {
        #[arg(long)]
        model: PathBuf,
        /// Include the decision path of every verdict.
        #[arg(long)]
        explain: bool,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Leave-one-device-out evaluation of a scenario.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        scenario: String,
        #[command(flatten)]
        hyper: Hyper,
        /// Write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Per-symbol maximum pairwise LLR as TSV, highest first.
    LlrReport {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
    },
    /// Write a synthetic corpus and its manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        videos_per_cell: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Hyper {
    /// LLR threshold; symbols whose maximum pairwise LLR does not exceed it are dropped.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Cost-complexity pruning strength; 0 disables pruning.
    #[arg(long, default_value_t = 0.0)]
    pub ccp_alpha: f64,
    /// Maximum tree depth; unlimited when omitted.
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
}

impl Hyper {
    fn config(&self) -> Result<TrainConfig, CliError> {
        let filter = FilterConfig::new(self.tau).map_err(|e| CliError::Usage(e.to_string()))?;
        if !(self.ccp_alpha >= 0.0 && self.ccp_alpha.is_finite()) {
            return Err(CliError::Usage(format!(
                "--ccp-alpha must be a non-negative number, got {}",
                self.ccp_alpha
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(CliError::Usage(
                "--min-samples-leaf must be at least 1".into(),
            ));
        }
        Ok(TrainConfig {
            filter,
            tree: TreeParams {
                max_depth: self.max_depth,
                min_samples_leaf: self.min_samples_leaf,
                ccp_alpha: self.ccp_alpha,
            },
        })
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Parse(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

fn data(e: impl fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn io_context(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Parse {
            file,
            symbols,
            tree: _,
            format,
        } => cmd_parse(&file, symbols, format, out),
        Command::Train {
            manifest,
            scenario,
            hyper,
            out: model_path,
            dot,
        } => cmd_train(
            &manifest,
            &scenario,
            &hyper,
            &model_path,
            dot.as_deref(),
            out,
            err,
        ),
        Command::Classify {
            model,
            explain,
            files,
        } => cmd_classify(&model, &files, explain, out),
        Command::Evaluate {
            manifest,
            scenario,
            hyper,
            report,
        } => cmd_evaluate(&manifest, &scenario, &hyper, report.as_deref(), out, err),
        Command::LlrReport {
            manifest,
            scenario,
            tau,
        } => cmd_llr_report(&manifest, &scenario, tau, out, err),
        Command::Synth {
            out: dir,
            seed,
            videos_per_cell,
        } => cmd_synth(&dir, seed, videos_per_cell, out),
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(data)
}

#[derive(Serialize)]
struct SymbolLine<'a> {
    count: u32,
    kind: &'a str,
    symbol: &'a str,
}

pub fn cmd_parse(
    file: &Path,
    symbols: bool,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let tree = parse_file(file).map_err(|e| CliError::Parse(format!("{}: {e}", file.display())))?;
    let text = match (symbols, format) {
        (false, Format::Text) => dump_tree(&tree, DumpFormat::Text),
        (false, Format::Json) => dump_tree(&tree, DumpFormat::Json),
        (true, Format::Text) => extract_symbols(&tree, &default_blacklist()).dump(),
        (true, Format::Json) => {
            let ms = extract_symbols(&tree, &default_blacklist());
            let lines: Vec<SymbolLine> = ms
                .iter()
                .map(|(s, count)| SymbolLine {
                    count,
                    kind: s.kind().as_str(),
                    symbol: s.as_str(),
                })
                .collect();
            serde_json::to_string_pretty(&lines).map_err(data)? + "\n"
        }
    };
    write_out(out, &text)
}

fn parse_scenario(name: &str) -> Result<Scenario, CliError> {
    name.parse()
        .map_err(|e: EvalError| CliError::Usage(e.to_string()))
}

fn open_manifest(path: &Path, err: &mut dyn Write) -> Result<DatasetManifest, CliError> {
    let manifest =
        load_manifest(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if !manifest.missing.is_empty() {
        let _ = writeln!(
            err,
            "warning: {} manifest row(s) skipped because the file is missing",
            manifest.missing.len()
        );
    }
    Ok(manifest)
}

fn samples_for(manifest: &DatasetManifest, scenario: &Scenario) -> Result<Vec<Sample>, CliError> {
    scenario_samples(manifest, scenario, &default_blacklist()).map_err(data)
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn cmd_train(
    manifest_path: &Path,
    scenario: &str,
    hyper: &Hyper,
    model_path: &Path,
    dot: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let scenario = parse_scenario(scenario)?;
    let cfg = hyper.config()?;
    let manifest_bytes = fs::read(manifest_path).map_err(io_context(manifest_path))?;
    let manifest = open_manifest(manifest_path, err)?;
    let samples = samples_for(&manifest, &scenario)?;
    let corpus: Vec<LabeledMultiset> = samples.into_iter().map(|s| s.labeled).collect();
    let mut model = train_model(&corpus, &cfg).map_err(data)?.model;
    model.metadata.scenario = Some(scenario.to_string());
    model.metadata.manifest_digest = Some(sha256_hex(&manifest_bytes));
    model.metadata.created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs());
    if model.is_degenerate() {
        let _ = writeln!(
            err,
            "warning: no symbol has an LLR above tau={}; the model is a single leaf predicting '{}'",
            cfg.filter.tau(),
            model.classes()[model.tree.root.label]
        );
    }
    fs::write(model_path, to_canonical_string(&model)).map_err(io_context(model_path))?;
    if let Some(dot_path) = dot {
        fs::write(dot_path, to_dot(&model.tree)).map_err(io_context(dot_path))?;
    }
    write_out(
        out,
        &format!(
            "trained {} on {} files: {} symbols, {} kept, {} leaves, classes {}\nmodel written to {}\n",
            scenario,
            corpus.len(),
            model.vocabulary.len(),
            model.kept_vocabulary().len(),
            model.tree.root.leaf_count(),
            model.classes().join(", "),
            model_path.display()
        ),
    )
}

#[derive(Serialize)]
struct ExplainedStep<'a> {
    #[serde(flatten)]
    step: &'a PathStep,
    check: String,
}

#[derive(Serialize)]
struct VerdictLine<'a> {
    file: String,
    model: &'a str,
    predicted: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<Vec<ExplainedStep<'a>>>,
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    file: String,
    model: &'a str,
    error: &'a str,
    message: String,
}

/// One output line for `file`.
fn classify_line(model: &TrainedModel, model_id: &str, file: &Path, explain: bool) -> String {
    let name = file.display().to_string();
    let failure = |error: &str, message: String| {
        serde_json::to_string(&ErrorLine {
            file: name.clone(),
            model: model_id,
            error,
            message,
        })
        .expect("serializable")
    };
    let tree = match parse_file(file) {
        Ok(t) => t,
        Err(e) => return failure(e.kind(), e.to_string()),
    };
    let symbols = extract_symbols(&tree, &default_blacklist());
    match model.classify(&symbols) {
        Ok(v) => serde_json::to_string(&VerdictLine {
            file: name.clone(),
            model: model_id,
            predicted: &v.label,
            path: explain.then(|| {
                v.path
                    .iter()
                    .map(|step| ExplainedStep {
                        step,
                        check: step.to_string(),
                    })
                    .collect()
            }),
        })
        .expect("serializable"),
        Err(e) => failure("Classification", e.to_string()),
    }
}

pub fn cmd_classify(
    model_path: &Path,
    files: &[PathBuf],
    explain: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let bytes = fs::read(model_path).map_err(io_context(model_path))?;
    let model = load_model(model_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", model_path.display())))?;
    let model_id = sha256_hex(&bytes);
    let lines: Vec<String> = files
        .par_iter()
        .map(|f| classify_line(&model, &model_id, f, explain))
        .collect();
    let mut text = String::new();
    for line in lines {
        text.push_str(&line);
        text.push('\n');
    }
    write_out(out, &text)
}

pub fn cmd_evaluate(
    manifest_path: &Path,
    scenario: &str,
    hyper: &Hyper,
    report_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let scenario = parse_scenario(scenario)?;
    let cfg = hyper.config()?;
    let manifest = open_manifest(manifest_path, err)?;
    let samples = samples_for(&manifest, &scenario)?;
    let run = evaluate_samples(
        &samples,
        &scenario.to_string(),
        scenario.positive_class(),
        &cfg,
    )
    .map_err(data)?;
    write_out(out, &run.report.render_text())?;
    if let Some(path) = report_path {
        let json = serde_json::to_string_pretty(&run.report).map_err(data)? + "\n";
        fs::write(path, json).map_err(io_context(path))?;
    }
    Ok(())
}

pub fn cmd_llr_report(
    manifest_path: &Path,
    scenario: &str,
    tau: f64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let scenario = parse_scenario(scenario)?;
    let filter = FilterConfig::new(tau).map_err(|e| CliError::Usage(e.to_string()))?;
    let manifest = open_manifest(manifest_path, err)?;
    let corpus: Vec<LabeledMultiset> = samples_for(&manifest, &scenario)?
        .into_iter()
        .map(|s| s.labeled)
        .collect();
    let vocab = build_vocabulary(corpus.iter().map(|s| &s.symbols)).map_err(data)?;
    let table = class_frequency(&corpus).map_err(data)?;
    let report = score_vocabulary(&vocab, &table, &filter);
    let mut text = String::from("symbol\tbest_pair\tllr\tkept\ttau\n");
    for e in report.ranked() {
        text.push_str(&format!(
            "{}\t{}>{}\t{:.6}\t{}\t{}\n",
            e.symbol, e.best_pair.0, e.best_pair.1, e.max_llr, e.kept, report.tau
        ));
    }
    write_out(out, &text)
}

pub fn cmd_synth(
    dir: &Path,
    seed: u64,
    videos_per_cell: usize,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let spec = FixtureSpec {
        videos_per_cell,
        ..FixtureSpec::desk_scale(seed)
    };
    let manifest = generate_corpus(&spec, dir).map_err(io_context(dir))?;
    write_out(
        out,
        &format!(
            "wrote {} files and manifest.csv to {}\n",
            manifest.rows.len(),
            dir.display()
        ),
    )
}
