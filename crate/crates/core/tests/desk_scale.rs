use container_forensics::evaluation::{run_scenario, Scenario};
use container_forensics::pipeline::TrainConfig;
use container_forensics::symbols::default_blacklist;
use container_forensics::synth::{generate_corpus, FixtureSpec};

#[test]
fn desk_scale_scenarios_separate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_corpus(&FixtureSpec::desk_scale(2024), dir.path()).unwrap();
    assert_eq!(manifest.rows.len(), 96);
    for name in [
        "integrity",
        "software",
        "software_os",
        "blind",
        "social_integrity(youtube)",
    ] {
        let scenario: Scenario = name.parse().unwrap();
        let report = run_scenario(
            &manifest,
            &scenario,
            &TrainConfig::default(),
            &default_blacklist(),
        )
        .unwrap();
        assert_eq!(report.global_balanced_accuracy, 1.0, "{name}");
        assert!(report.folds.iter().all(|f| !f.at_chance), "{name}");
        assert_eq!(report.folds.len(), 6);
        assert_eq!(report.explanations_verified, report.predictions);
    }
}
