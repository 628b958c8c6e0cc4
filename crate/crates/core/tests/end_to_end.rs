use proptest::prelude::*;
use tcnad_core::datagen::{generate, DriveCycleConfig};
use tcnad_core::detector::{classify, select_threshold, ErrorModel, ScoredWindow, Verdict};
use tcnad_core::metrics::DetectionReport;
use tcnad_core::scenarios::{anomalous_cases, inject, InjectionConfig};
use tcnad_core::tcn::{predict, train_with, TcnConfig, TcnModel};
use tcnad_core::{
    apply_scaler, clean, fit_scaler, make_windows, split_windows, to_supervised, ChannelSchema,
    WindowConfig,
};

fn residuals(targets: &[f64], pred: &[f64]) -> Vec<f64> {
    targets.iter().zip(pred).map(|(a, b)| a - b).collect()
}

#[test]
fn short_run_detects_injected_faults() {
    let schema = ChannelSchema::vehicle_default();
    let p = schema.feature_count();
    let raw = generate(
        &DriveCycleConfig {
            duration_s: 3600,
            seed: 12,
            ..DriveCycleConfig::default()
        },
        &schema,
    )
    .unwrap();
    let (frame, _) = clean(&raw).unwrap();
    let scaled = apply_scaler(&frame, &fit_scaler(&frame).unwrap()).unwrap();
    let wcfg = WindowConfig::default();
    let (ws, stats) = make_windows(&scaled, &wcfg).unwrap();
    assert_eq!(
        stats.emitted + stats.discarded,
        scaled.rows() - wcfg.window + 1
    );
    let split = split_windows(&ws, &wcfg).unwrap();
    let train = to_supervised(&split.train).unwrap();
    let test = to_supervised(&split.test).unwrap();

    let mut model = TcnModel::new(TcnConfig {
        filters: 16,
        dilations: vec![1, 2, 4, 8],
        max_epochs: 15,
        seed: 3,
        ..TcnConfig::default()
    })
    .unwrap();
    let mut first = None;
    let summary = train_with(&mut model, &train, |r| {
        first.get_or_insert(r.val_loss);
    })
    .unwrap();
    assert!(summary.best_val_loss < 0.5 * first.unwrap(), "{summary:?}");

    let em = ErrorModel::fit(
        &residuals(&train.targets, &predict(&model, &train).unwrap()),
        p,
    )
    .unwrap();
    let pred = predict(&model, &test).unwrap();
    let inj = inject(
        &test.targets,
        &schema,
        &InjectionConfig {
            seed: 4,
            ..InjectionConfig::default()
        },
        &anomalous_cases(),
    )
    .unwrap();
    let md = em.score_rows(&residuals(&inj.targets, &pred)).unwrap();
    let mut scored: Vec<ScoredWindow> = md
        .iter()
        .zip(&inj.labels)
        .enumerate()
        .map(|(index, (&md, &actual))| ScoredWindow {
            index,
            md,
            actual,
            predicted: Verdict::Normal,
        })
        .collect();
    let choice = select_threshold(&scored).unwrap();
    classify(&mut scored, choice.threshold);
    let report = DetectionReport::build(&scored, &choice, &inj.manifest).unwrap();
    assert!(report.auc > 0.9, "auc {}", report.auc);
    let c = &report.confusion;
    assert_eq!(c.tp + c.tn + c.fp + c.fn_, test.len());
    assert_eq!(c.tp + c.fn_, inj.manifest.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn injection_only_touches_recorded_cells(n in 5usize..400, seed in any::<u64>(), rate in 0.05f64..0.6) {
        let schema = ChannelSchema::vehicle_default();
        let p = schema.feature_count();
        let targets: Vec<f64> = (0..n * p).map(|i| ((i * 7919) % 2001) as f64 / 1000.0 - 1.0).collect();
        let cfg = InjectionConfig { rate, seed, ..InjectionConfig::default() };
        let inj = inject(&targets, &schema, &cfg, &anomalous_cases()).unwrap();
        prop_assert_eq!(inj.manifest.len(), (rate * n as f64).floor() as usize);
        let mut allowed = vec![false; n * p];
        for rec in &inj.manifest {
            for ch in &rec.channels {
                allowed[rec.window_index * p + schema.feature_index(&ch.name).unwrap()] = true;
            }
        }
        for i in 0..n * p {
            if !allowed[i] {
                prop_assert_eq!(inj.targets[i].to_bits(), targets[i].to_bits());
            }
            prop_assert!((-1.0..=1.0).contains(&inj.targets[i]));
        }
    }
}
