use std::path::Path;

use tcnad::config::{artifact, RunConfig, ThresholdSource};
use tcnad::core::metrics::auc_from_points;
use tcnad::core::to_supervised;
use tcnad::{formats, pipeline};

fn small(dir: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::from_json(
        r#"{
            "drivecycle": {"duration_s": 2400},
            "tcn": {"filters": 8, "dilations": [1, 2, 4], "max_epochs": 2, "batch_size": 64}
        }"#,
    )
    .unwrap();
    cfg.set_seed(seed);
    cfg.paths.data = dir.join("data.csv");
    cfg.paths.out_dir = dir.join("out");
    cfg
}

#[test]
fn generate_writes_one_row_per_second() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), 1);
    cfg.drivecycle.duration_s = 3600;
    assert_eq!(pipeline::generate_to_disk(&cfg).unwrap(), 3600);
    let text = std::fs::read_to_string(&cfg.paths.data).unwrap();
    assert_eq!(text.lines().count(), 3601);
    assert!(text.starts_with("UTC_1HZ,"));
}

#[test]
fn generate_is_byte_identical_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline::generate_to_disk(&small(a.path(), 3)).unwrap();
    pipeline::generate_to_disk(&small(b.path(), 3)).unwrap();
    let c = tempfile::tempdir().unwrap();
    pipeline::generate_to_disk(&small(c.path(), 4)).unwrap();
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("data.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn gap_rate_drops_the_expected_share_of_rows() {
    let mut cfg = RunConfig::default();
    cfg.drivecycle.duration_s = 10_000;
    cfg.drivecycle.gap_rate = 0.05;
    let rows = pipeline::generate(&cfg).unwrap().rows() as f64;
    // binomial(10000, 0.95): sd = sqrt(10000 * 0.05 * 0.95)
    let sd = (10_000.0f64 * 0.05 * 0.95).sqrt();
    assert!((rows - 9500.0).abs() <= 3.0 * sd, "{rows} rows");
}

#[test]
fn train_and_evaluate_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 5);
    pipeline::generate_to_disk(&cfg).unwrap();
    let trained = pipeline::train_to_disk(&cfg).unwrap();
    let bundle = formats::read_bundle(&cfg.artifact(artifact::BUNDLE)).unwrap();
    assert_eq!(bundle.weights, trained.bundle.weights);
    assert_eq!(bundle.detector, trained.bundle.detector);
    assert_eq!(bundle.config, cfg.snapshot());

    let ev = pipeline::evaluate_to_disk(&cfg).unwrap();
    let r = formats::read_report(&cfg.artifact(artifact::REPORT)).unwrap();
    let c = &r.metrics.confusion;
    assert_eq!(c.tp + c.tn + c.fp + c.fn_, r.test_windows);
    assert_eq!(r.injected_windows, r.test_windows / 5);
    assert_eq!(r.evaluated_windows, r.test_windows);
    let injected: usize = r.metrics.per_scenario.values().map(|t| t.injected).sum();
    assert_eq!(injected, r.injected_windows);

    let roc = formats::read_roc_csv(&cfg.artifact(artifact::ROC)).unwrap();
    assert!((auc_from_points(&roc) - r.metrics.auc).abs() <= 1e-9);
    assert_eq!(
        formats::read_manifest(&cfg.artifact(artifact::MANIFEST)).unwrap(),
        ev.manifest
    );
    let tw = formats::read_windows(&cfg.artifact(artifact::TEST_WINDOWS)).unwrap();
    assert_eq!(tw.data, ev.test_windows.data);
    assert_eq!(tw.labels, ev.test_windows.labels);
    assert_eq!(
        tw.labels.iter().filter(|l| l.is_anomaly()).count(),
        r.injected_windows
    );
}

#[test]
fn loaded_bundle_reproduces_predictions_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 6);
    pipeline::generate_to_disk(&cfg).unwrap();
    let trained = pipeline::train_to_disk(&cfg).unwrap();
    let loaded = formats::read_bundle(&cfg.artifact(artifact::BUNDLE)).unwrap();
    let sup = to_supervised(&trained.windows).unwrap();
    let a = trained
        .bundle
        .model()
        .forward(&sup.inputs, sup.steps)
        .unwrap();
    let b = loaded.model().forward(&sup.inputs, sup.steps).unwrap();
    assert_eq!(a.len(), sup.targets.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn calibration_split_reports_on_held_out_windows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), 7);
    cfg.threshold_source = ThresholdSource::Calibration;
    cfg.calibration_fraction = 0.4;
    pipeline::generate_to_disk(&cfg).unwrap();
    pipeline::train_to_disk(&cfg).unwrap();
    let ev = pipeline::evaluate(&cfg).unwrap();
    let r = &ev.report;
    let n = r.test_windows;
    assert_eq!(r.calibration_windows, (0.4 * n as f64).floor() as usize);
    assert_eq!(r.calibration_windows + r.evaluated_windows, n);
    let c = &r.metrics.confusion;
    assert_eq!(c.tp + c.tn + c.fp + c.fn_, r.evaluated_windows);
    assert_eq!(ev.scored.len(), r.evaluated_windows);
}

#[test]
fn corrupt_data_fails_at_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 8);
    pipeline::generate_to_disk(&cfg).unwrap();
    let text = std::fs::read_to_string(&cfg.paths.data).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[10] = lines[10]
        .replacen(',', ",oops,", 1)
        .replacen(",oops,", ",oops", 1);
    std::fs::write(&cfg.paths.data, lines.join("\n")).unwrap();
    let err = pipeline::train(&cfg).unwrap_err();
    assert_eq!(err.stage, tcnad::Stage::Ingest);
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn evaluating_against_other_data_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 9);
    pipeline::generate_to_disk(&cfg).unwrap();
    pipeline::train_to_disk(&cfg).unwrap();
    let mut other = cfg.clone();
    other.drivecycle.duration_s = 3000;
    let raw = pipeline::generate(&other).unwrap();
    let bundle = formats::read_bundle(&cfg.artifact(artifact::BUNDLE)).unwrap();
    assert_eq!(
        pipeline::evaluate_frame(&cfg, &bundle, &raw)
            .unwrap_err()
            .exit_code(),
        3
    );
}
