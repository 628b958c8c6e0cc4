//! End-to-end stages: generate, train, evaluate.
//!
//! Each stage has an in-memory form returning its artifacts and a `*_to_disk`
//! form that reads and writes the files named in [`artifact`].

use std::collections::BTreeSet;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tcnad_core::datagen;
use tcnad_core::detector::{
    classify, select_threshold, ErrorModel, ScoredWindow, ThresholdChoice, Verdict,
};
use tcnad_core::metrics::DetectionReport;
use tcnad_core::scenarios::{anomalous_cases, inject, InjectionRecord};
use tcnad_core::tcn::{predict, train_with, EpochRecord, TcnModel, TrainSummary};
use tcnad_core::{
    clean, make_windows, split_windows, to_supervised, ChannelFrame, ChannelSchema, CleanStats,
    CoreError, ScalerParams, SplitSet, WindowSet, WindowStats,
};

use crate::config::{artifact, RunConfig, ScalerScope, ThresholdSource};
use crate::csv_io::{load_csv, write_csv};
use crate::error::{AtStage, Error, Result, Stage};
use crate::formats::{self, DetectorRecord, ModelBundle, ReportFile, ScalerFile, FORMAT_VERSION};

pub fn schema() -> ChannelSchema {
    ChannelSchema::vehicle_default()
}

// ---- generate ----

pub fn generate(cfg: &RunConfig) -> Result<ChannelFrame> {
    cfg.validate()?;
    datagen::generate(&cfg.drivecycle, &schema()).at(Stage::Generate)
}

/// Writes the synthetic stream to `paths.data` and returns its row count.
pub fn generate_to_disk(cfg: &RunConfig) -> Result<usize> {
    let frame = generate(cfg)?;
    write_csv(&cfg.paths.data, &frame)?;
    info!(
        "wrote {} rows to {}",
        frame.rows(),
        cfg.paths.data.display()
    );
    Ok(frame.rows())
}

// ---- shared preparation ----

/// Cleaned stream cut into unscaled windows and split.
#[derive(Debug)]
pub struct Prepared {
    pub frame: ChannelFrame,
    pub clean: CleanStats,
    pub windows: WindowStats,
    pub split: SplitSet,
}

pub fn prepare(cfg: &RunConfig, raw: &ChannelFrame) -> Result<Prepared> {
    let (frame, clean_stats) = clean(raw).at(Stage::Ingest)?;
    info!(
        "cleaned {} rows: {} with nulls, {} duplicates, {} kept",
        clean_stats.input_rows,
        clean_stats.null_rows,
        clean_stats.duplicate_rows,
        clean_stats.output_rows
    );
    // validity depends only on timestamps, so scaling can wait until the split is known
    let (ws, stats) = make_windows(&frame, &cfg.window).at(Stage::Window)?;
    if ws.is_empty() {
        return Err(Error::new(
            Stage::Window,
            CoreError::EmptyData("no valid windows".into()),
        ));
    }
    info!("{} windows, {} discarded", stats.emitted, stats.discarded);
    let split = split_windows(&ws, &cfg.window).at(Stage::Window)?;
    Ok(Prepared {
        frame,
        clean: clean_stats,
        windows: stats,
        split,
    })
}

fn fit_scope_scaler(scope: ScalerScope, prepared: &Prepared) -> Result<ScalerParams> {
    let names = prepared.frame.schema().feature_names();
    match scope {
        ScalerScope::Full => ScalerParams::fit_rows(
            &names,
            (0..prepared.frame.rows()).map(|i| prepared.frame.row(i)),
        )
        .at(Stage::Scale),
        ScalerScope::TrainOnly => {
            ScalerParams::fit_rows(&names, prepared.split.train.rows()).at(Stage::Scale)
        }
    }
}

fn scaled(ws: &WindowSet, scaler: &ScalerParams) -> WindowSet {
    let mut out = ws.clone();
    scaler.scale_in_place(&mut out.data);
    out
}

/// `actual - predicted`, row-major N x P.
fn errors(actual: &[f64], predicted: &[f64]) -> Vec<f64> {
    actual.iter().zip(predicted).map(|(a, p)| a - p).collect()
}

// ---- train ----

#[derive(Debug)]
pub struct Trained {
    pub bundle: ModelBundle,
    pub prepared: Prepared,
    /// Every window, scaled with the fitted scaler.
    pub windows: WindowSet,
}

pub fn train_from_frame<F: FnMut(&EpochRecord)>(
    cfg: &RunConfig,
    raw: &ChannelFrame,
    observer: F,
) -> Result<Trained> {
    cfg.validate()?;
    let prepared = prepare(cfg, raw)?;
    let scaler = fit_scope_scaler(cfg.scaler_scope, &prepared)?;
    let train_ws = scaled(&prepared.split.train, &scaler);
    let data = to_supervised(&train_ws).at(Stage::Train)?;

    let p = raw.schema().feature_count();
    let mut tcn_cfg = cfg.tcn.clone();
    tcn_cfg.input_channels = p;
    tcn_cfg.output_units = p;
    let mut model = TcnModel::new(tcn_cfg).at(Stage::Train)?;
    info!(
        "training on {} windows, receptive field {}, {} parameters",
        data.len(),
        model.receptive_field(),
        model.params.num_params()
    );
    let summary: TrainSummary = train_with(&mut model, &data, observer).at(Stage::Train)?;
    info!(
        "best validation loss {:e} at epoch {} of {}",
        summary.best_val_loss, summary.best_epoch, summary.epochs_run
    );

    let pred = predict(&model, &data).at(Stage::Detect)?;
    let detector = ErrorModel::fit(&errors(&data.targets, &pred), p).at(Stage::Detect)?;

    let mut snapshot = cfg.snapshot();
    snapshot.tcn = model.config.clone();
    let bundle = ModelBundle {
        version: FORMAT_VERSION,
        config: snapshot,
        channels: raw.schema().feature_names(),
        receptive_field: model.receptive_field(),
        scaler: ScalerFile::from(&scaler),
        weights: model.params,
        detector: DetectorRecord::from(&detector),
        training: summary,
        history: model.history,
    };
    let all = {
        let mut w = prepared.split.train.clone();
        let t = &prepared.split.test;
        w.data.extend_from_slice(&t.data);
        w.start_timestamps.extend_from_slice(&t.start_timestamps);
        w.start_rows.extend_from_slice(&t.start_rows);
        w.labels.extend_from_slice(&t.labels);
        scaled(&w, &scaler)
    };
    Ok(Trained {
        bundle,
        prepared,
        windows: all,
    })
}

pub fn train(cfg: &RunConfig) -> Result<Trained> {
    let raw = load_csv(&cfg.paths.data, &schema())?;
    train_from_frame(cfg, &raw, |r| {
        info!(
            "epoch {:>3}  train {:.6e}  val {:.6e}",
            r.epoch, r.train_loss, r.val_loss
        )
    })
}

/// Trains from `paths.data` and writes the bundle, the scaler and the scaled
/// windows (train split first, then test) to `out_dir`.
pub fn train_to_disk(cfg: &RunConfig) -> Result<Trained> {
    let trained = train(cfg)?;
    formats::write_bundle(&cfg.artifact(artifact::BUNDLE), &trained.bundle)?;
    formats::write_scaler(
        &cfg.artifact(artifact::SCALER),
        &trained.bundle.scaler.clone().into(),
    )?;
    formats::write_windows(&cfg.artifact(artifact::WINDOWS), &trained.windows)?;
    Ok(trained)
}

// ---- evaluate ----

#[derive(Debug)]
pub struct Evaluation {
    pub report: ReportFile,
    pub manifest: Vec<InjectionRecord>,
    /// Test windows after injection, labels set.
    pub test_windows: WindowSet,
    /// One entry per evaluated window; `index` is the position in the test set.
    pub scored: Vec<ScoredWindow>,
    pub choice: ThresholdChoice,
}

/// Rebuilds the test split the bundle was trained against, injects
/// anomalies, scores every window and classifies at the selected threshold.
pub fn evaluate_frame(
    cfg: &RunConfig,
    bundle: &ModelBundle,
    raw: &ChannelFrame,
) -> Result<Evaluation> {
    cfg.validate()?;
    let names = raw.schema().feature_names();
    if bundle.channels != names {
        return Err(Error::new(
            Stage::Evaluate,
            CoreError::Schema(format!(
                "bundle channels {:?} differ from data channels",
                bundle.channels
            )),
        ));
    }
    let scaler: ScalerParams = bundle.scaler.clone().into();
    scaler.check_names(&names).at(Stage::Evaluate)?;
    let detector = bundle.detector.to_model()?;
    let model = bundle.model();

    // windowing and split follow the bundle so the test set is the one held out in training
    let mut replay = cfg.clone();
    replay.window = bundle.config.window.clone();
    let prepared = prepare(&replay, raw)?;
    let trained_on = bundle.training.train_samples + bundle.training.val_samples;
    if prepared.split.train.len() != trained_on {
        return Err(Error::new(
            Stage::Evaluate,
            CoreError::Consistency(format!(
                "data yields {} training windows but the bundle was trained on {trained_on}",
                prepared.split.train.len()
            )),
        ));
    }
    let mut test_ws = scaled(&prepared.split.test, &scaler);
    let test = to_supervised(&test_ws).at(Stage::Evaluate)?;
    let pred = predict(&model, &test).at(Stage::Evaluate)?;

    let injection = inject(
        &test.targets,
        raw.schema(),
        &cfg.injection,
        &anomalous_cases(),
    )
    .at(Stage::Inject)?;
    let n = test.len();
    let (m, p) = (test_ws.steps, test_ws.channels);
    for (i, label) in injection.labels.iter().enumerate() {
        test_ws.labels[i] = *label;
        let last = (i * m + m - 1) * p;
        test_ws.data[last..last + p].copy_from_slice(&injection.targets[i * p..(i + 1) * p]);
    }
    let md = detector
        .score_rows(&errors(&injection.targets, &pred))
        .at(Stage::Detect)?;
    let all: Vec<ScoredWindow> = md
        .iter()
        .zip(&injection.labels)
        .enumerate()
        .map(|(index, (&md, &actual))| ScoredWindow {
            index,
            md,
            actual,
            predicted: Verdict::Normal,
        })
        .collect();

    let (calibration, mut evaluated): (Vec<ScoredWindow>, Vec<ScoredWindow>) =
        match cfg.threshold_source {
            ThresholdSource::Test => (all.clone(), all),
            ThresholdSource::Calibration => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.calibration_seed()));
                let k = ((cfg.calibration_fraction * n as f64).floor() as usize)
                    .clamp(1, n.saturating_sub(1));
                let held: BTreeSet<usize> = order[..k].iter().copied().collect();
                all.into_iter().partition(|w| held.contains(&w.index))
            }
        };
    let choice = select_threshold(&calibration).at(Stage::Evaluate)?;
    classify(&mut evaluated, choice.threshold);
    let kept: BTreeSet<usize> = evaluated.iter().map(|w| w.index).collect();
    let manifest_eval: Vec<InjectionRecord> = injection
        .manifest
        .iter()
        .filter(|r| kept.contains(&r.window_index))
        .cloned()
        .collect();
    let metrics =
        DetectionReport::build(&evaluated, &choice, &manifest_eval).at(Stage::Evaluate)?;
    info!(
        "threshold {:.6} auc {:.4} accuracy {:.4} tpr {:.4} fpr {:.4}",
        choice.threshold, metrics.auc, metrics.accuracy, metrics.tpr, metrics.fpr
    );
    let report = ReportFile {
        version: FORMAT_VERSION,
        threshold_source: cfg.threshold_source,
        test_windows: n,
        evaluated_windows: evaluated.len(),
        injected_windows: injection.manifest.len(),
        calibration_windows: match cfg.threshold_source {
            ThresholdSource::Test => 0,
            ThresholdSource::Calibration => calibration.len(),
        },
        lambda: detector.lambda,
        receptive_field: bundle.receptive_field,
        metrics,
    };
    Ok(Evaluation {
        report,
        manifest: injection.manifest,
        test_windows: test_ws,
        scored: evaluated,
        choice,
    })
}

pub fn evaluate(cfg: &RunConfig) -> Result<Evaluation> {
    let bundle = formats::read_bundle(&cfg.artifact(artifact::BUNDLE))?;
    let raw = load_csv(&cfg.paths.data, &schema())?;
    evaluate_frame(cfg, &bundle, &raw)
}

/// Writes the report, the ROC points, the injection manifest and the
/// injected test windows to `out_dir`.
pub fn evaluate_to_disk(cfg: &RunConfig) -> Result<Evaluation> {
    let ev = evaluate(cfg)?;
    formats::write_report(&cfg.artifact(artifact::REPORT), &ev.report)?;
    formats::write_roc_csv(&cfg.artifact(artifact::ROC), &ev.report.metrics.roc)?;
    formats::write_manifest(&cfg.artifact(artifact::MANIFEST), &ev.manifest)?;
    formats::write_windows(&cfg.artifact(artifact::TEST_WINDOWS), &ev.test_windows)?;
    Ok(ev)
}
