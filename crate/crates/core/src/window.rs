//! Sliding-window restructuring into an N x M x P dataset.
//!
//! A window is `w` consecutive rows of a cleaned frame. It is kept only when
//! the elapsed time between its first and last row satisfies
//! `et <= w / dr + dt`, which rejects windows that straddle gaps in the
//! stream.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, CoreResult};
use crate::frame::ChannelFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitMode {
    #[default]
    Random,
    Chronological,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WindowConfig {
    /// Window length `w` in observations.
    pub window: usize,
    pub stride: usize,
    /// Expected data rate in Hz.
    pub data_rate: f64,
    /// Extra elapsed seconds tolerated per window.
    pub delta_t: f64,
    pub split_fraction: f64,
    pub split_mode: SplitMode,
    pub seed: u64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window: 20,
            stride: 1,
            data_rate: 1.0,
            delta_t: 2.0,
            split_fraction: 0.7,
            split_mode: SplitMode::Random,
            seed: 0,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> CoreResult<()> {
        if self.window < 2 {
            return Err(CoreError::Config(format!(
                "window must be >= 2, got {}",
                self.window
            )));
        }
        if self.stride < 1 {
            return Err(CoreError::Config("stride must be >= 1".into()));
        }
        if !(self.data_rate > 0.0) {
            return Err(CoreError::Config("data_rate must be > 0".into()));
        }
        if !(self.delta_t >= 0.0) {
            return Err(CoreError::Config("delta_t must be >= 0".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(CoreError::Config(
                "split_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Largest elapsed time (seconds) a valid window may span.
    pub fn max_elapsed(&self) -> f64 {
        self.window as f64 / self.data_rate + self.delta_t
    }

    pub fn is_valid_span(&self, first: i64, last: i64) -> bool {
        ((last - first) as f64) <= self.max_elapsed()
    }
}

/// Ground-truth tag of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Label {
    #[default]
    Normal,
    Anomaly {
        scenario: u8,
        case: u8,
    },
}

impl Label {
    pub fn is_anomaly(self) -> bool {
        matches!(self, Label::Anomaly { .. })
    }

    /// One-byte code: 0 for normal, `scenario << 4 | case` otherwise.
    pub fn code(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Anomaly { scenario, case } => (scenario << 4) | (case & 0x0f),
        }
    }

    pub fn from_code(code: u8) -> Self {
        if code == 0 {
            Label::Normal
        } else {
            Label::Anomaly {
                scenario: code >> 4,
                case: code & 0x0f,
            }
        }
    }
}

/// N windows of M rows over P channels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub steps: usize,
    pub channels: usize,
    pub data: Vec<f64>,
    pub start_timestamps: Vec<i64>,
    /// Row of the source frame each window starts at.
    pub start_rows: Vec<usize>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowStats {
    pub emitted: usize,
    pub discarded: usize,
}

impl WindowSet {
    pub fn empty(steps: usize, channels: usize) -> Self {
        Self {
            steps,
            channels,
            data: Vec::new(),
            start_timestamps: Vec::new(),
            start_rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.start_timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start_timestamps.is_empty()
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let sz = self.steps * self.channels;
        &self.data[i * sz..(i + 1) * sz]
    }

    /// Iterates every row of every window (overlapping rows repeat).
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.channels)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut out = Self::empty(self.steps, self.channels);
        out.data.reserve(indices.len() * self.steps * self.channels);
        for &i in indices {
            out.data.extend_from_slice(self.window(i));
            out.start_timestamps.push(self.start_timestamps[i]);
            out.start_rows.push(self.start_rows[i]);
            out.labels.push(self.labels[i]);
        }
        out
    }
}

/// Start rows of every valid window, in order.
pub fn window_starts(timestamps: &[i64], cfg: &WindowConfig) -> (Vec<usize>, WindowStats) {
    let w = cfg.window;
    let mut starts = Vec::new();
    let mut stats = WindowStats::default();
    if timestamps.len() < w {
        return (starts, stats);
    }
    for s in (0..=timestamps.len() - w).step_by(cfg.stride) {
        if cfg.is_valid_span(timestamps[s], timestamps[s + w - 1]) {
            starts.push(s);
            stats.emitted += 1;
        } else {
            stats.discarded += 1;
        }
    }
    (starts, stats)
}

pub fn make_windows(
    frame: &ChannelFrame,
    cfg: &WindowConfig,
) -> CoreResult<(WindowSet, WindowStats)> {
    cfg.validate()?;
    let (starts, stats) = window_starts(frame.timestamps(), cfg);
    let p = frame.width();
    let mut ws = WindowSet::empty(cfg.window, p);
    ws.data.reserve(starts.len() * cfg.window * p);
    let values = frame.values();
    for &s in &starts {
        ws.data
            .extend_from_slice(&values[s * p..(s + cfg.window) * p]);
        ws.start_timestamps.push(frame.timestamps()[s]);
        ws.start_rows.push(s);
        ws.labels.push(Label::Normal);
    }
    Ok((ws, stats))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet {
    pub train: WindowSet,
    pub test: WindowSet,
}

/// Index partition used by [`split_windows`]; `train` and `test` are disjoint.
pub fn split_indices(n: usize, cfg: &WindowConfig) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    if cfg.split_mode == SplitMode::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        order.shuffle(&mut rng);
    }
    let n_train = libm::floor(cfg.split_fraction * n as f64) as usize;
    let test = order.split_off(n_train);
    (order, test)
}

pub fn split_windows(ws: &WindowSet, cfg: &WindowConfig) -> CoreResult<SplitSet> {
    cfg.validate()?;
    if ws.is_empty() {
        return Err(CoreError::EmptyData(
            "cannot split an empty window set".into(),
        ));
    }
    let (train, test) = split_indices(ws.len(), cfg);
    Ok(SplitSet {
        train: ws.subset(&train),
        test: ws.subset(&test),
    })
}

/// Inputs (first M-1 rows) and next-step targets (row M-1) of each window.
#[derive(Debug, Clone, PartialEq)]
pub struct Supervised {
    pub steps: usize,
    pub channels: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Supervised {
    pub fn len(&self) -> usize {
        if self.channels == 0 {
            0
        } else {
            self.targets.len() / self.channels
        }
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let sz = self.steps * self.channels;
        &self.inputs[i * sz..(i + 1) * sz]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.channels..(i + 1) * self.channels]
    }
}

pub fn to_supervised(ws: &WindowSet) -> CoreResult<Supervised> {
    if ws.steps < 2 {
        return Err(CoreError::Config(format!(
            "windows need at least 2 rows, got {}",
            ws.steps
        )));
    }
    let p = ws.channels;
    let steps = ws.steps - 1;
    let mut inputs = Vec::with_capacity(ws.len() * steps * p);
    let mut targets = Vec::with_capacity(ws.len() * p);
    for i in 0..ws.len() {
        let win = ws.window(i);
        inputs.extend_from_slice(&win[..steps * p]);
        targets.extend_from_slice(&win[steps * p..]);
    }
    Ok(Supervised {
        steps,
        channels: p,
        inputs,
        targets,
    })
}
