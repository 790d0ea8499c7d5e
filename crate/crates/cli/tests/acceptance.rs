//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on
//! any failure. Criterion 9 needs the external EVA-7K dataset and runs only
//! when `EVA7K_MANIFEST` points at its manifest.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use cfx_cli::run;
use container_forensics::bmff::{dump_tree, parse_file, DumpFormat, ParseError};
use container_forensics::cart::{best_split, to_dot, NodeKind, TIE_EPSILON};
use container_forensics::evaluation::{
    balanced_accuracy, evaluate_samples, load_manifest, lodo_folds, run_scenario_detailed,
    scenario_samples, ConfusionMatrix, DatasetManifest, EvaluationRun, ManifestRow, Os, Platform,
    Sample, Scenario, Software,
};
use container_forensics::llr::{
    class_frequency, llr, score_vocabulary, FilterConfig, LabeledMultiset,
};
use container_forensics::model_file::{from_json_str, to_canonical_string};
use container_forensics::pipeline::{train_model, TrainConfig, TrainedModel};
use container_forensics::symbols::{default_blacklist, Symbol, SymbolMultiset};
use container_forensics::synth::{generate_corpus, FixtureSpec};
use container_forensics::vocab::build_vocabulary;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn sym(s: &str) -> Symbol {
    Symbol::parse(s).expect("valid symbol")
}

/// State shared between criteria: models to round-trip and explanation
/// counts from every evaluation run.
#[derive(Default)]
struct Shared {
    models: Vec<(String, TrainedModel)>,
    model_files: Vec<(String, String)>,
    predictions: usize,
    verified: usize,
}

impl Shared {
    fn record_run(&mut self, run: &EvaluationRun) {
        self.predictions += run.report.predictions;
        self.verified += run.report.explanations_verified;
    }
}

// Criterion 1: parser fixtures.

fn bx(code: &[u8; 4], payload: &[u8]) -> Vec<u8> {
    let mut out = ((payload.len() + 8) as u32).to_be_bytes().to_vec();
    out.extend_from_slice(code);
    out.extend_from_slice(payload);
    out
}

const FTYP_ISOM: [u8; 20] = [
    0, 0, 0, 20, b'f', b't', b'y', b'p', b'i', b's', b'o', b'm', 0, 0, 0, 0, b'i', b's', b'o', b'm',
];

enum Expect {
    Tree(String),
    Error(&'static str, Option<u64>),
}

fn fixtures() -> Vec<(&'static str, Vec<u8>, Expect)> {
    let ftyp_text = "ftyp\n  @majorBrand: isom\n  @minorVersion: 0\n  @compatibleBrand_1: isom\n";
    let mut v = Vec::new();

    v.push((
        "ftyp-only",
        FTYP_ISOM.to_vec(),
        Expect::Tree(ftyp_text.into()),
    ));

    let mut two = b"isom".to_vec();
    two.extend_from_slice(&[0, 0, 2, 0]);
    two.extend_from_slice(b"isom3gp4");
    v.push((
        "two compatible brands",
        bx(b"ftyp", &two),
        Expect::Tree("ftyp\n  @majorBrand: isom\n  @minorVersion: 512\n  @compatibleBrand_1: isom\n  @compatibleBrand_2: 3gp4\n".into()),
    ));

    // hdlr: version/flags, pre_defined, handler, 12 reserved, name\0
    let mut hdlr = vec![0; 8];
    hdlr.extend_from_slice(b"vide");
    hdlr.extend_from_slice(&[0; 12]);
    hdlr.extend_from_slice(b"VideoHandler\0");
    let nested = bx(b"moov", &bx(b"trak", &bx(b"mdia", &bx(b"hdlr", &hdlr))));
    v.push((
        "nested moov/trak",
        nested,
        Expect::Tree(
            "moov\n  trak\n    mdia\n      hdlr\n        @version: 0\n        @flags: 0\n        @handlerType: vide\n        @name: VideoHandler\n".into(),
        ),
    ));

    let mut traks = bx(b"trak", &bx(b"abcd", &[1]));
    traks.extend(bx(b"trak", &bx(b"wxyz", &[1, 2])));
    v.push((
        "sibling order",
        bx(b"moov", &traks),
        Expect::Tree(
            "moov\n  trak\n    abcd\n      @stuff: opaque\n      @count: 1\n  trak\n    wxyz\n      @stuff: opaque\n      @count: 2\n".into(),
        ),
    ));

    let mut large = FTYP_ISOM.to_vec();
    large.extend_from_slice(&[0, 0, 0, 1]);
    large.extend_from_slice(b"mdat");
    large.extend_from_slice(&26u64.to_be_bytes());
    large.extend_from_slice(&[7; 10]);
    v.push((
        "64-bit size",
        large,
        Expect::Tree(format!("{ftyp_text}mdat\n  @stuff: opaque\n  @count: 10\n")),
    ));

    let mut to_eof = FTYP_ISOM.to_vec();
    to_eof.extend_from_slice(&[0, 0, 0, 0]);
    to_eof.extend_from_slice(b"mdat");
    to_eof.extend_from_slice(&[1; 7]);
    v.push((
        "size-0 final box",
        to_eof,
        Expect::Tree(format!("{ftyp_text}mdat\n  @stuff: opaque\n  @count: 7\n")),
    ));

    let mut uuid = FTYP_ISOM.to_vec();
    let mut payload: Vec<u8> = (0u8..16).collect();
    payload.extend_from_slice(&[9; 5]);
    uuid.extend(bx(b"uuid", &payload));
    v.push((
        "uuid box",
        uuid,
        Expect::Tree(format!("{ftyp_text}uuid\n  @userType: 0x000102030405060708090a0b0c0d0e0f\n  @stuff: opaque\n  @count: 5\n")),
    ));

    let mut unknown = FTYP_ISOM.to_vec();
    unknown.extend(bx(b"abcd", &[1, 2, 3]));
    v.push((
        "unknown box",
        unknown,
        Expect::Tree(format!("{ftyp_text}abcd\n  @stuff: opaque\n  @count: 3\n")),
    ));

    let mut truncated = FTYP_ISOM.to_vec();
    truncated.extend_from_slice(&[0, 0, 0, 100]);
    truncated.extend_from_slice(b"moov");
    truncated.extend_from_slice(&[0; 12]);
    v.push((
        "truncated box",
        truncated,
        Expect::Error("TruncatedBox", Some(20)),
    ));

    let mut nested_zero = bx(b"moov", &[0, 0, 0, 0, b't', b'r', b'a', b'k']);
    nested_zero.extend_from_slice(&[0; 4]);
    nested_zero[3] += 4;
    v.push((
        "nested size-0",
        nested_zero,
        Expect::Error("ZeroSizeNonFinal", Some(8)),
    ));

    let mut tiny = FTYP_ISOM.to_vec();
    tiny.extend_from_slice(&[0, 0, 0, 4]);
    tiny.extend_from_slice(b"free");
    v.push((
        "size below header",
        tiny,
        Expect::Error("InvalidBoxSize", Some(20)),
    ));

    v.push((
        "text file",
        b"hello, this is not a video\n".to_vec(),
        Expect::Error("NotBmff", None),
    ));
    v.push(("empty file", Vec::new(), Expect::Error("NotBmff", None)));
    v
}

fn error_offset(e: &ParseError) -> Option<u64> {
    match e {
        ParseError::TruncatedBox { offset, .. }
        | ParseError::ZeroSizeNonFinal { offset, .. }
        | ParseError::InvalidBoxSize { offset, .. } => Some(*offset),
        _ => None,
    }
}

fn criterion_1(dir: &Path) -> Outcome {
    let fixtures = fixtures();
    let mut paths = Vec::new();
    for (i, (_, bytes, _)) in fixtures.iter().enumerate() {
        let p = dir.join(format!("fixture_{i:02}.bin"));
        fs::write(&p, bytes).map_err(|e| e.to_string())?;
        paths.push(p);
    }
    let started = Instant::now();
    for ((name, _, expect), path) in fixtures.iter().zip(&paths) {
        match (parse_file(path), expect) {
            (Ok(tree), Expect::Tree(want)) => {
                let got = dump_tree(&tree, DumpFormat::Text);
                check(&got == want, format!("{name}: got\n{got}"))?;
                check(
                    tree.warnings.is_empty(),
                    format!("{name}: unexpected warnings"),
                )?;
            }
            (Err(e), Expect::Error(kind, offset)) => {
                check(e.kind() == *kind, format!("{name}: got {e}"))?;
                check(
                    error_offset(&e) == *offset,
                    format!("{name}: offset in {e}"),
                )?;
            }
            (Ok(_), Expect::Error(kind, _)) => {
                return Err(format!("{name}: parsed, expected {kind}"))
            }
            (Err(e), Expect::Tree(_)) => return Err(format!("{name}: {e}")),
        }
    }
    let elapsed = started.elapsed();
    check(
        elapsed < Duration::from_secs(1),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "{} fixtures in {:.1} ms",
        fixtures.len(),
        elapsed.as_secs_f64() * 1e3
    ))
}

// Criterion 2: the single-symbol tree.

fn xmp_samples() -> Vec<Sample> {
    let mut out = Vec::new();
    for d in 1..=4 {
        let device = format!("D{d:02}");
        for i in 0..3 {
            for label in ["Native", "Exiftool"] {
                let mut ms = SymbolMultiset::new(format!("{device}-{label}-{i}"));
                for s in [
                    "ftyp/@majorBrand",
                    "ftyp/@majorBrand/qt  ",
                    "moov/mvhd/@duration",
                    "moov/udta/\\xa9mak/@stuff",
                ] {
                    ms.insert(sym(s));
                }
                ms.insert(sym(&format!("moov/udta/\\xa9mod/@stuff/{device}")));
                if label == "Exiftool" {
                    ms.insert(sym("moov/udta/XMP_/@stuff"));
                }
                out.push(Sample {
                    device: device.clone(),
                    labeled: LabeledMultiset {
                        symbols: ms,
                        label: label.into(),
                    },
                });
            }
        }
    }
    out
}

fn criterion_2(shared: &mut Shared) -> Outcome {
    let samples = xmp_samples();
    let corpus: Vec<LabeledMultiset> = samples.iter().map(|s| s.labeled.clone()).collect();
    let model = train_model(&corpus, &TrainConfig::default())
        .map_err(|e| e.to_string())?
        .model;
    let tree = &model.tree;
    let NodeKind::Split {
        feature,
        threshold,
        left,
        right,
    } = &tree.root.kind
    else {
        return Err("root is a leaf".into());
    };
    check(left.is_leaf() && right.is_leaf(), "tree deeper than 1")?;
    let symbol = tree.vocabulary.symbols()[*feature].display_path();
    check(
        symbol == "root/moov/udta/XMP_/@stuff",
        format!("split on {symbol}"),
    )?;
    check(*threshold == 0.5, format!("threshold {threshold}"))?;
    check(tree.classes()[left.label] == "Native", "left leaf")?;
    check(tree.classes()[right.label] == "Exiftool", "right leaf")?;
    let dot = to_dot(tree);
    check(
        dot.contains("count(root/moov/udta/XMP_/@stuff) ≤ 0.5"),
        "DOT label",
    )?;
    let correct = corpus
        .iter()
        .filter(|s| model.predict(&s.symbols).ok() == Some(s.label.as_str()))
        .count();
    check(
        correct == corpus.len(),
        format!("training accuracy {correct}/{}", corpus.len()),
    )?;
    let run = evaluate_samples(&samples, "xmp", None, &TrainConfig::default())
        .map_err(|e| e.to_string())?;
    shared.record_run(&run);
    check(
        run.report.global_balanced_accuracy == 1.0,
        format!(
            "LODO balanced accuracy {}",
            run.report.global_balanced_accuracy
        ),
    )?;
    for (i, m) in run.models.iter().enumerate() {
        shared.models.push((format!("xmp fold {i}"), m.clone()));
    }
    shared.models.push(("xmp full".into(), model));
    Ok(format!(
        "count(root/moov/udta/XMP_/@stuff) <= 0.5, training 100%, LODO BA 1.00 over {} folds",
        run.report.folds.len()
    ))
}

// Criterion 3: split search against exhaustive enumeration.

fn oracle_split(rows: &[Vec<u32>], labels: &[usize], w: &[f64]) -> Option<(usize, f64)> {
    let gini = |m: &[f64]| {
        let t: f64 = m.iter().sum();
        1.0 - m.iter().map(|x| (x / t) * (x / t)).sum::<f64>()
    };
    let mut parent = vec![0.0; w.len()];
    for &l in labels {
        parent[l] += w[l];
    }
    let total: f64 = parent.iter().sum();
    let mut best = None;
    let mut best_d = 0.0;
    for f in 0..rows[0].len() {
        let values: BTreeSet<u32> = rows.iter().map(|r| r[f]).collect();
        let values: Vec<u32> = values.into_iter().collect();
        for pair in values.windows(2) {
            let thr = (pair[0] as f64 + pair[1] as f64) / 2.0;
            let mut left = vec![0.0; w.len()];
            let mut right = vec![0.0; w.len()];
            for (r, &l) in rows.iter().zip(labels) {
                if (r[f] as f64) <= thr {
                    left[l] += w[l];
                } else {
                    right[l] += w[l];
                }
            }
            let (wl, wr) = (left.iter().sum::<f64>(), right.iter().sum::<f64>());
            let d = gini(&parent) - wl / total * gini(&left) - wr / total * gini(&right);
            if d > best_d + TIE_EPSILON {
                best_d = d;
                best = Some((f, thr));
            }
        }
    }
    best
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agree = 0;
    let mut splits = 0;
    for case in 0..200 {
        let n = rng.gen_range(1..=8);
        let f = rng.gen_range(1..=4);
        let k = rng.gen_range(2..=3);
        let rows: Vec<Vec<u32>> = (0..n)
            .map(|_| (0..f).map(|_| rng.gen_range(0..=2)).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..5.0)).collect();
        let got = best_split(&rows, &labels, &w, 1).map(|s| (s.feature_index, s.threshold));
        let want = oracle_split(&rows, &labels, &w);
        if got != want {
            return Err(format!("case {case}: best_split {got:?}, oracle {want:?}"));
        }
        agree += 1;
        splits += usize::from(want.is_some());
    }
    Ok(format!(
        "{agree}/200 corpora agree ({splits} with a split, {} without)",
        200 - splits
    ))
}

// Criterion 4: LLR properties and the worked value.

fn random_llr_corpus(rng: &mut ChaCha8Rng) -> Vec<LabeledMultiset> {
    let classes = ["A", "B", "C"];
    let k = rng.gen_range(2..=3);
    let mut out = Vec::new();
    for (c, class) in classes.iter().take(k).enumerate() {
        for i in 0..rng.gen_range(1..6) {
            let mut ms = SymbolMultiset::new(format!("{c}-{i}"));
            for s in 0..6 {
                if rng.gen_bool(0.5) {
                    ms.insert(sym(&format!("moov/s{s}/@f")));
                }
            }
            // Present in this class only.
            ms.insert(sym(&format!("moov/only{c}/@f")));
            out.push(LabeledMultiset {
                symbols: ms,
                label: (*class).into(),
            });
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let taus = [0.1, 0.5, 1.0, 2.0];
    let mut worst_antisym: f64 = 0.0;
    for case in 0..100 {
        let corpus = random_llr_corpus(&mut rng);
        let vocab =
            build_vocabulary(corpus.iter().map(|s| &s.symbols)).map_err(|e| e.to_string())?;
        let table = class_frequency(&corpus).map_err(|e| e.to_string())?;
        let classes = table.classes().to_vec();
        for s in vocab.symbols() {
            for u in &classes {
                for v in &classes {
                    if u == v {
                        continue;
                    }
                    let a = llr(s, u, v, &table).map_err(|e| e.to_string())?;
                    let b = llr(s, v, u, &table).map_err(|e| e.to_string())?;
                    check(
                        a.is_finite(),
                        format!("case {case}: non-finite LLR for {s}"),
                    )?;
                    worst_antisym = worst_antisym.max((a + b).abs());
                }
            }
        }
        let mut previous: Option<BTreeSet<Symbol>> = None;
        for tau in taus {
            let cfg = FilterConfig::new(tau).map_err(|e| e.to_string())?;
            let report = score_vocabulary(&vocab, &table, &cfg);
            let kept: BTreeSet<Symbol> = report
                .entries
                .iter()
                .filter(|e| e.kept)
                .map(|e| e.symbol.clone())
                .collect();
            if let Some(prev) = &previous {
                check(
                    kept.is_subset(prev),
                    format!("case {case}: kept set grew at tau {tau}"),
                )?;
            }
            previous = Some(kept);
        }
    }
    check(
        worst_antisym <= 1e-12,
        format!("antisymmetry error {worst_antisym:e}"),
    )?;

    // Class A: 3 of 4 containers hold the symbol; class B: 0 of 2.
    let s = sym("moov/udta/XMP_/@stuff");
    let mut corpus = Vec::new();
    for (label, n, with) in [("A", 4, 3), ("B", 2, 0)] {
        for i in 0..n {
            let mut ms = SymbolMultiset::new(format!("{label}{i}"));
            ms.insert(sym("ftyp/@majorBrand"));
            if i < with {
                ms.insert(s.clone());
            }
            corpus.push(LabeledMultiset {
                symbols: ms,
                label: label.into(),
            });
        }
    }
    let table = class_frequency(&corpus).map_err(|e| e.to_string())?;
    let got = llr(&s, "A", "B", &table).map_err(|e| e.to_string())?;
    let hand = (4.0f64 / 5.0 / (1.0 / 3.0)).ln();
    check((got - 0.875469).abs() < 1e-6, format!("worked value {got}"))?;
    check(
        (got - hand).abs() < 1e-12,
        format!("worked value {got} vs {hand}"),
    )?;
    Ok(format!(
        "100 corpora finite and monotone over tau {taus:?}; max |llr(u,v)+llr(v,u)| = {worst_antisym:e}; ln 2.4 = {got:.6}"
    ))
}

// Criterion 5: evaluation invariants.

fn random_manifest(rng: &mut ChaCha8Rng) -> DatasetManifest {
    let n = rng.gen_range(2..40);
    let devices = rng.gen_range(1..9);
    let rows = (0..n)
        .map(|i| ManifestRow {
            line: i as u64 + 2,
            file: format!("v{i}.mp4").into(),
            device: format!("D{}", rng.gen_range(0..devices)),
            os: Os::Ios,
            software: Software::None,
            platform: Platform::None,
        })
        .collect();
    DatasetManifest {
        rows,
        missing: vec![],
    }
}

/// Two classes on every device, symbols drawn at random, so fold
/// accuracies vary.
fn noisy_two_class(rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let mut out = Vec::new();
    for d in 0..5 {
        for label in ["Pristine", "Tampered"] {
            for i in 0..4 {
                let mut ms = SymbolMultiset::new(format!("D{d}-{label}-{i}"));
                for s in 0..5 {
                    let p = if label == "Tampered" && s < 2 {
                        0.8
                    } else {
                        0.35
                    };
                    if rng.gen_bool(p) {
                        ms.insert(sym(&format!("moov/a{s}/@f")));
                    }
                }
                ms.insert(sym("ftyp/@majorBrand"));
                out.push(Sample {
                    device: format!("D{d}"),
                    labeled: LabeledMultiset {
                        symbols: ms,
                        label: label.into(),
                    },
                });
            }
        }
    }
    out
}

fn leakage_free(
    samples: &[Sample],
    run: &EvaluationRun,
    cfg: &TrainConfig,
) -> Result<usize, String> {
    for (fold, model) in run.report.folds.iter().zip(&run.models) {
        let kept: Vec<LabeledMultiset> = samples
            .iter()
            .filter(|s| s.device != fold.device)
            .map(|s| s.labeled.clone())
            .collect();
        let retrained = train_model(&kept, cfg).map_err(|e| e.to_string())?.model;
        check(
            to_canonical_string(&retrained) == to_canonical_string(model),
            format!("fold {} model differs after deleting its rows", fold.device),
        )?;
    }
    Ok(run.models.len())
}

fn criterion_5(dir: &Path, shared: &mut Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..200 {
        let m = random_manifest(&mut rng);
        let devices = m.devices().len();
        match lodo_folds(&m) {
            Ok(folds) => check(
                folds.len() == devices,
                format!("case {case}: {} folds, {devices} devices", folds.len()),
            )?,
            Err(_) => check(
                devices == 1,
                format!("case {case}: folds failed with {devices} devices"),
            )?,
        }
    }

    let cfg = TrainConfig::default();
    let mut checked_folds = 0;
    let mut worst_rate_gap: f64 = 0.0;
    for seed in 0..5 {
        let samples = noisy_two_class(&mut ChaCha8Rng::seed_from_u64(50 + seed));
        let run = evaluate_samples(&samples, "integrity", Some("Pristine"), &cfg)
            .map_err(|e| e.to_string())?;
        shared.record_run(&run);
        checked_folds += leakage_free(&samples, &run, &cfg)?;
        let rates = run
            .report
            .rates
            .as_ref()
            .ok_or("no TPR/TNR for two classes")?;
        worst_rate_gap = worst_rate_gap
            .max((run.report.global_balanced_accuracy - (rates.tpr + rates.tnr) / 2.0).abs());
    }

    let corpus = dir.join("c5");
    let manifest = generate_corpus(
        &FixtureSpec {
            videos_per_cell: 2,
            ..FixtureSpec::desk_scale(55)
        },
        &corpus,
    )
    .map_err(|e| e.to_string())?;
    let scenario = Scenario::Integrity;
    let samples =
        scenario_samples(&manifest, &scenario, &default_blacklist()).map_err(|e| e.to_string())?;
    let run = evaluate_samples(&samples, "integrity", scenario.positive_class(), &cfg)
        .map_err(|e| e.to_string())?;
    shared.record_run(&run);
    checked_folds += leakage_free(&samples, &run, &cfg)?;
    let rates = run.report.rates.as_ref().ok_or("no TPR/TNR")?;
    worst_rate_gap = worst_rate_gap
        .max((run.report.global_balanced_accuracy - (rates.tpr + rates.tnr) / 2.0).abs());
    check(
        worst_rate_gap <= 1e-12,
        format!("|BA - (TPR+TNR)/2| = {worst_rate_gap:e}"),
    )?;

    for case in 0..200 {
        let k = rng.gen_range(2..5);
        let counts: Vec<Vec<u64>> = (0..k)
            .map(|_| (0..k).map(|_| rng.gen_range(0..15)).collect())
            .collect();
        let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let cm = ConfusionMatrix::from_counts(classes.clone(), counts.clone());
        let Ok(base) = balanced_accuracy(&cm) else {
            continue;
        };
        let class = rng.gen_range(0..k);
        let times = rng.gen_range(2..6);
        let mut dup = counts;
        for x in &mut dup[class] {
            *x *= times;
        }
        let scaled = balanced_accuracy(&ConfusionMatrix::from_counts(classes, dup))
            .map_err(|e| e.to_string())?;
        check(
            (base - scaled).abs() < 1e-12,
            format!("case {case}: duplication changed BA"),
        )?;
    }
    Ok(format!(
        "fold count == device count on 200 manifests; {checked_folds} fold models byte-identical after deleting held-out rows; max |BA-(TPR+TNR)/2| = {worst_rate_gap:e}; duplication invariant on 200 matrices"
    ))
}

// Criterion 7: desk-scale end-to-end run through the CLI.

fn cfx(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("cfx").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}

fn criterion_7(dir: &Path, shared: &mut Shared) -> Outcome {
    let started = Instant::now();
    let corpus = dir.join("desk");
    let corpus_s = corpus.to_str().ok_or("non-UTF-8 temp path")?;
    let (code, _, err) = cfx(&[
        "synth",
        "--out",
        corpus_s,
        "--seed",
        "2024",
        "--videos-per-cell",
        "4",
    ]);
    check(code == 0, format!("synth failed: {err}"))?;
    let manifest_path = corpus.join("manifest.csv");
    let manifest_s = manifest_path.to_str().ok_or("non-UTF-8 temp path")?;
    let manifest = load_manifest(&manifest_path).map_err(|e| e.to_string())?;
    check(
        manifest.rows.len() == 96,
        format!("{} manifest rows", manifest.rows.len()),
    )?;

    let mut summary = Vec::new();
    for scenario in ["blind", "integrity"] {
        let report = dir.join(format!("{scenario}.json"));
        let (code, out, err) = cfx(&[
            "evaluate",
            "--manifest",
            manifest_s,
            "--scenario",
            scenario,
            "--report",
            report.to_str().ok_or("path")?,
        ]);
        check(code == 0, format!("{scenario}: exit {code}: {err}"))?;
        check(
            out.contains("global balanced accuracy: 1.00"),
            format!("{scenario}: printed\n{out}"),
        )?;
        let device_rows = out.lines().filter(|l| l.starts_with("D0")).count();
        check(
            device_rows == 6,
            format!("{scenario}: {device_rows} per-device rows"),
        )?;
        let v: Value =
            serde_json::from_str(&fs::read_to_string(&report).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        let ba = v["global_balanced_accuracy"].as_f64().unwrap_or(f64::NAN);
        check(ba == 1.0, format!("{scenario}: balanced accuracy {ba}"))?;
        summary.push(format!(
            "{scenario} BA {ba:.2} over {} classes",
            v["classes"].as_array().map_or(0, Vec::len)
        ));
    }

    let model_path = dir.join("desk_model.json");
    let (code, _, err) = cfx(&[
        "train",
        "--manifest",
        manifest_s,
        "--scenario",
        "blind",
        "--out",
        model_path.to_str().ok_or("path")?,
    ]);
    check(code == 0, format!("train failed: {err}"))?;
    shared.model_files.push((
        "desk cmd_train".into(),
        fs::read_to_string(&model_path).map_err(|e| e.to_string())?,
    ));
    let elapsed = started.elapsed();

    // Fold models and explanation replay for criteria 6 and 8.
    for scenario in [Scenario::Blind, Scenario::Integrity] {
        let run = run_scenario_detailed(
            &manifest,
            &scenario,
            &TrainConfig::default(),
            &default_blacklist(),
        )
        .map_err(|e| e.to_string())?;
        shared.record_run(&run);
        let samples = scenario_samples(&manifest, &scenario, &default_blacklist())
            .map_err(|e| e.to_string())?;
        for (fold, model) in run.report.folds.iter().zip(&run.models) {
            for s in samples.iter().filter(|s| s.device == fold.device) {
                let v = container_forensics::vocab::vectorize(
                    &s.labeled.symbols,
                    model.kept_vocabulary(),
                );
                let predicted = model.tree.predict(&v).map_err(|e| e.to_string())?;
                let path = model.tree.decision_path(&v).map_err(|e| e.to_string())?;
                let replayed = model.tree.replay(&path, &v).map_err(|e| e.to_string())?;
                shared.predictions += 1;
                shared.verified += usize::from(replayed == predicted);
            }
        }
        for (i, m) in run.models.into_iter().enumerate() {
            shared.models.push((format!("desk {scenario} fold {i}"), m));
        }
    }

    check(
        elapsed < Duration::from_secs(30),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "{}; synth+evaluate+train in {:.2} s",
        summary.join(", "),
        elapsed.as_secs_f64()
    ))
}

fn criterion_6(shared: &Shared) -> Outcome {
    check(shared.predictions > 0, "no predictions recorded")?;
    check(
        shared.verified == shared.predictions,
        format!(
            "{}/{} explanations replay to the predicted label",
            shared.verified, shared.predictions
        ),
    )?;
    Ok(format!(
        "{}/{} decision paths replay to the predicted label",
        shared.verified, shared.predictions
    ))
}

fn criterion_8(shared: &Shared) -> Outcome {
    let mut n = 0;
    for (name, model) in &shared.models {
        let first = to_canonical_string(model);
        let loaded = from_json_str(&first).map_err(|e| format!("{name}: {e}"))?;
        let second = to_canonical_string(&loaded);
        check(second == first, format!("{name}: save/load/save differs"))?;
        let third =
            to_canonical_string(&from_json_str(&second).map_err(|e| format!("{name}: {e}"))?);
        check(
            third == second,
            format!("{name}: second round trip differs"),
        )?;
        n += 1;
    }
    for (name, text) in &shared.model_files {
        let loaded = from_json_str(text).map_err(|e| format!("{name}: {e}"))?;
        check(
            &to_canonical_string(&loaded) == text,
            format!("{name}: load/save differs from file"),
        )?;
        n += 1;
    }
    check(n > 0, "no models")?;
    Ok(format!("{n} models byte-identical after save/load/save"))
}

fn criterion_9() -> Option<Outcome> {
    let path = std::env::var_os("EVA7K_MANIFEST")?;
    let path = Path::new(&path);
    let run = || -> Outcome {
        let manifest = load_manifest(path).map_err(|e| e.to_string())?;
        let cfg = TrainConfig::default();
        let mut parts = Vec::new();
        for (scenario, floor) in [(Scenario::Integrity, 0.95), (Scenario::Software, 0.93)] {
            let run = run_scenario_detailed(&manifest, &scenario, &cfg, &default_blacklist())
                .map_err(|e| e.to_string())?;
            let ba = run.report.global_balanced_accuracy;
            let slowest = run
                .report
                .folds
                .iter()
                .map(|f| f.train_seconds)
                .fold(0.0, f64::max);
            check(
                ba >= floor,
                format!("{scenario}: balanced accuracy {ba:.3} < {floor}"),
            )?;
            check(
                slowest < 310.0,
                format!("{scenario}: slowest fold trained in {slowest:.1} s"),
            )?;
            parts.push(format!(
                "{scenario} BA {ba:.3} (slowest fold {slowest:.1} s)"
            ));
        }
        Ok(parts.join(", "))
    };
    Some(run())
}

fn report(n: u32, title: &str, outcome: &Outcome, failures: &mut u32) {
    match outcome {
        Ok(detail) => println!("criterion {n}: PASS  {title}: {detail}"),
        Err(why) => {
            *failures += 1;
            println!("criterion {n}: FAIL  {title}: {why}");
        }
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut shared = Shared::default();
    let mut failures = 0;

    report(
        1,
        "parser fixtures",
        &criterion_1(dir.path()),
        &mut failures,
    );
    report(
        2,
        "single-symbol tree",
        &criterion_2(&mut shared),
        &mut failures,
    );
    report(3, "split oracle", &criterion_3(), &mut failures);
    report(4, "LLR suite", &criterion_4(), &mut failures);
    report(
        5,
        "evaluation invariants",
        &criterion_5(dir.path(), &mut shared),
        &mut failures,
    );
    let c7 = criterion_7(dir.path(), &mut shared);
    report(
        6,
        "explanation self-verification",
        &criterion_6(&shared),
        &mut failures,
    );
    report(7, "desk-scale end-to-end", &c7, &mut failures);
    report(8, "model round-trip", &criterion_8(&shared), &mut failures);
    match criterion_9() {
        Some(outcome) => report(9, "EVA-7K full run", &outcome, &mut failures),
        None => println!(
            "criterion 9: SKIP  EVA-7K full run: set EVA7K_MANIFEST to the dataset manifest"
        ),
    }

    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
