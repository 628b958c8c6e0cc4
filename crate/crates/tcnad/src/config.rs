//! Run configuration: one JSON document covering every stage.
//!
//! Sub-configuration seeds that the document leaves out are derived from the
//! global `seed`, so a single number pins down a whole run.

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tcnad_core::datagen::DriveCycleConfig;
use tcnad_core::scenarios::InjectionConfig;
use tcnad_core::tcn::TcnConfig;
use tcnad_core::WindowConfig;

use crate::error::{Error, Result, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerScope {
    /// Fit on the rows of the training windows only.
    #[default]
    TrainOnly,
    /// Fit on the whole cleaned frame.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    /// Select and report on the same injected test windows.
    #[default]
    Test,
    /// Select on a held-out share of the test windows, report on the rest.
    Calibration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Observation CSV: written by `generate`, read by `train` and `evaluate`.
    pub data: PathBuf,
    /// Directory for bundles, reports and other artifacts.
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data.csv"),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl Paths {
    fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

/// Artifact file names inside `out_dir`.
pub mod artifact {
    pub const BUNDLE: &str = "model.json";
    pub const SCALER: &str = "scaler.json";
    pub const WINDOWS: &str = "windows.bin";
    pub const TEST_WINDOWS: &str = "test_windows.bin";
    pub const REPORT: &str = "report.json";
    pub const ROC: &str = "roc.csv";
    pub const MANIFEST: &str = "manifest.jsonl";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub window: WindowConfig,
    pub tcn: TcnConfig,
    pub injection: InjectionConfig,
    pub drivecycle: DriveCycleConfig,
    pub scaler_scope: ScalerScope,
    pub threshold_source: ThresholdSource,
    /// Share of test windows held out for threshold selection under `calibration`.
    pub calibration_fraction: f64,
    #[serde(skip_serializing_if = "Paths::is_default")]
    pub paths: Paths,
    /// Sub-seeds given explicitly in the document; the rest follow `seed`.
    #[serde(skip)]
    pinned: Pinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Pinned {
    window: bool,
    tcn: bool,
    injection: bool,
    drivecycle: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = Self {
            seed: 0,
            window: WindowConfig::default(),
            tcn: TcnConfig::default(),
            injection: InjectionConfig::default(),
            drivecycle: DriveCycleConfig::default(),
            scaler_scope: ScalerScope::default(),
            threshold_source: ThresholdSource::default(),
            calibration_fraction: 0.5,
            paths: Paths::default(),
            pinned: Pinned::default(),
        };
        cfg.derive_seeds();
        cfg
    }
}

/// Stream ids used to derive sub-seeds from the global seed.
mod stream {
    pub const WINDOW: u64 = 1;
    pub const TCN: u64 = 2;
    pub const INJECTION: u64 = 3;
    pub const DRIVECYCLE: u64 = 4;
    pub const CALIBRATION: u64 = 5;
}

pub fn derive_seed(global: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(global);
    rng.set_stream(stream);
    rng.next_u64()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("config is not valid JSON: {e}")))?;
        let has_seed = |key: &str| value.get(key).and_then(|v| v.get("seed")).is_some();
        let pinned = Pinned {
            window: has_seed("window"),
            tcn: has_seed("tcn"),
            injection: has_seed("injection"),
            drivecycle: has_seed("drivecycle"),
        };
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::config(e.to_string()))?;
        cfg.pinned = pinned;
        cfg.derive_seeds();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(Stage::Config, path, e))?;
        Self::from_json(&text)
    }

    /// Replaces the global seed and re-derives every unpinned sub-seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.derive_seeds();
    }

    fn derive_seeds(&mut self) {
        let g = self.seed;
        if !self.pinned.window {
            self.window.seed = derive_seed(g, stream::WINDOW);
        }
        if !self.pinned.tcn {
            self.tcn.seed = derive_seed(g, stream::TCN);
        }
        if !self.pinned.injection {
            self.injection.seed = derive_seed(g, stream::INJECTION);
        }
        if !self.pinned.drivecycle {
            self.drivecycle.seed = derive_seed(g, stream::DRIVECYCLE);
        }
    }

    pub fn calibration_seed(&self) -> u64 {
        derive_seed(self.seed, stream::CALIBRATION)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |r: tcnad_core::CoreResult<()>| r.map_err(|e| Error::new(Stage::Config, e));
        wrap(self.window.validate())?;
        wrap(self.tcn.validate())?;
        wrap(self.injection.validate())?;
        wrap(self.drivecycle.validate())?;
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return Err(Error::config("calibration_fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    /// The configuration with paths reset, as recorded in artifacts.
    pub fn snapshot(&self) -> Self {
        Self {
            paths: Paths::default(),
            ..self.clone()
        }
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.paths.out_dir.join(name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
