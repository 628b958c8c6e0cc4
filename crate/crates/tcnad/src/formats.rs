//! On-disk artifact formats.
//!
//! | artifact | format |
//! |---|---|
//! | scaler | JSON `{version, channels: [{name, min, max}]}` |
//! | windows | binary container, see [`write_windows`] |
//! | model bundle | JSON, see [`ModelBundle`] |
//! | injection manifest | JSON lines, one [`InjectionRecord`] per corrupted window |
//! | report | JSON [`ReportFile`] plus ROC points as CSV `fpr,tpr,threshold` |
//!
//! JSON floats are written in shortest round-trip form and parsed exactly, so
//! reloading an artifact reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tcnad_core::detector::ErrorModel;
use tcnad_core::metrics::{DetectionReport, RocPoint};
use tcnad_core::scenarios::InjectionRecord;
use tcnad_core::tcn::{EpochRecord, TcnModel, TcnParams, TrainSummary};
use tcnad_core::{float_repr, ChannelRange, Label, ScalerParams, WindowSet};

use crate::config::{RunConfig, ThresholdSource};
use crate::error::{AtStage, Error, Result, Stage};

pub const FORMAT_VERSION: u32 = 1;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(Stage::Io, dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(Stage::Io, path, e))
}

fn open(path: &Path, stage: Stage) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(stage, path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::format(Stage::Io, path, e.to_string()))?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(Stage::Io, path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, stage: Stage) -> Result<T> {
    serde_json::from_reader(open(path, stage)?)
        .map_err(|e| Error::format(stage, path, e.to_string()))
}

// ---- scaler ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerFile {
    pub version: u32,
    pub channels: Vec<ChannelRange>,
}

impl From<&ScalerParams> for ScalerFile {
    fn from(p: &ScalerParams) -> Self {
        Self {
            version: FORMAT_VERSION,
            channels: p.channels.clone(),
        }
    }
}

impl From<ScalerFile> for ScalerParams {
    fn from(f: ScalerFile) -> Self {
        ScalerParams {
            channels: f.channels,
        }
    }
}

pub fn write_scaler(path: &Path, params: &ScalerParams) -> Result<()> {
    write_json(path, &ScalerFile::from(params))
}

pub fn read_scaler(path: &Path) -> Result<ScalerParams> {
    let f: ScalerFile = read_json(path, Stage::Scale)?;
    check_version(f.version, path, Stage::Scale)?;
    Ok(f.into())
}

fn check_version(v: u32, path: &Path, stage: Stage) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::format(
            stage,
            path,
            format!("unsupported version {v}"),
        ));
    }
    Ok(())
}

// ---- window container ----

pub const WINDOW_MAGIC: [u8; 4] = *b"TCNW";

/// Writes `magic "TCNW", version u32, N u64, M u64, P u64`, then N*M*P f64
/// values row-major, N i64 start timestamps and N u8 label codes, all
/// little-endian.
pub fn write_windows(path: &Path, ws: &WindowSet) -> Result<()> {
    let mut out = create(path)?;
    encode_windows(&mut out, ws)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(Stage::Io, path, e))
}

pub fn encode_windows<W: Write>(out: &mut W, ws: &WindowSet) -> std::io::Result<()> {
    out.write_all(&WINDOW_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for d in [ws.len(), ws.steps, ws.channels] {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in &ws.data {
        out.write_all(&v.to_le_bytes())?;
    }
    for t in &ws.start_timestamps {
        out.write_all(&t.to_le_bytes())?;
    }
    let codes: Vec<u8> = ws.labels.iter().map(|l| l.code()).collect();
    out.write_all(&codes)
}

/// Reads a window container. Source row indices are not stored; loaded
/// windows get `start_rows = 0..N`.
pub fn read_windows(path: &Path) -> Result<WindowSet> {
    let mut bytes = Vec::new();
    open(path, Stage::Window)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(Stage::Window, path, e))?;
    decode_windows(&bytes).map_err(|m| Error::format(Stage::Window, path, m))
}

pub fn decode_windows(bytes: &[u8]) -> std::result::Result<WindowSet, String> {
    let mut at = 0usize;
    let mut take = |n: usize| -> std::result::Result<&[u8], String> {
        let s = bytes
            .get(at..at + n)
            .ok_or_else(|| format!("truncated container at byte {at}"))?;
        at += n;
        Ok(s)
    };
    if take(4)? != WINDOW_MAGIC {
        return Err("bad magic".into());
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let mut dim = || -> std::result::Result<usize, String> {
        let v = u64::from_le_bytes(take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| format!("dimension {v} too large"))
    };
    let (n, m, p) = (dim()?, dim()?, dim()?);
    let cells = n
        .checked_mul(m)
        .and_then(|x| x.checked_mul(p))
        .ok_or("dimensions overflow")?;
    let expected = 32 + 8 * cells + 9 * n;
    if bytes.len() != expected {
        return Err(format!("expected {expected} bytes, found {}", bytes.len()));
    }
    let mut take = |n: usize| {
        let s = &bytes[at..at + n];
        at += n;
        s
    };
    let data = take(8 * cells)
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let start_timestamps = take(8 * n)
        .chunks_exact(8)
        .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels = take(n).iter().map(|&c| Label::from_code(c)).collect();
    Ok(WindowSet {
        steps: m,
        channels: p,
        data,
        start_timestamps,
        start_rows: (0..n).collect(),
        labels,
    })
}

// ---- model bundle ----

/// Persisted error model; `sigma` is row-major P x P without the ridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRecord {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub lambda: f64,
    #[serde(with = "float_repr::option")]
    pub threshold: Option<f64>,
}

impl From<&ErrorModel> for DetectorRecord {
    fn from(m: &ErrorModel) -> Self {
        Self {
            mu: m.mu.clone(),
            sigma: m.sigma.clone(),
            lambda: m.lambda,
            threshold: m.threshold,
        }
    }
}

impl DetectorRecord {
    pub fn to_model(&self) -> Result<ErrorModel> {
        ErrorModel::from_parts(
            self.mu.clone(),
            self.sigma.clone(),
            self.lambda,
            self.threshold,
        )
        .at(Stage::Detect)
    }
}

/// Everything needed to score new data.
///
/// `weights` lists the residual blocks in order, each as `conv1`, `conv2`
/// and an optional 1x1 `projection`, followed by the linear `head`. A
/// convolution's flat `weights` are indexed `[tap][in][out]`, tap 0 being
/// the current time step and tap `j` the step `j * dilation` earlier; the
/// head's are `[in][out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: u32,
    pub config: RunConfig,
    pub channels: Vec<String>,
    pub receptive_field: usize,
    pub scaler: ScalerFile,
    pub weights: TcnParams,
    pub detector: DetectorRecord,
    pub training: TrainSummary,
    pub history: Vec<EpochRecord>,
}

impl ModelBundle {
    pub fn model(&self) -> TcnModel {
        TcnModel {
            config: self.config.tcn.clone(),
            params: self.weights.clone(),
            scaler: Some(self.scaler.clone().into()),
            history: self.history.clone(),
        }
    }
}

pub fn write_bundle(path: &Path, bundle: &ModelBundle) -> Result<()> {
    write_json(path, bundle)
}

pub fn read_bundle(path: &Path) -> Result<ModelBundle> {
    let b: ModelBundle = read_json(path, Stage::Evaluate)?;
    check_version(b.version, path, Stage::Evaluate)?;
    Ok(b)
}

// ---- manifest ----

pub fn write_manifest(path: &Path, records: &[InjectionRecord]) -> Result<()> {
    let mut out = create(path)?;
    for r in records {
        serde_json::to_writer(&mut out, r)
            .map_err(|e| Error::format(Stage::Io, path, e.to_string()))?;
        out.write_all(b"\n")
            .map_err(|e| Error::io(Stage::Io, path, e))?;
    }
    out.flush().map_err(|e| Error::io(Stage::Io, path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<InjectionRecord>> {
    let mut out = Vec::new();
    for (i, line) in open(path, Stage::Report)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(Stage::Report, path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format(Stage::Report, path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

// ---- report ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: u32,
    pub threshold_source: ThresholdSource,
    /// Test windows before any calibration split.
    pub test_windows: usize,
    /// Windows the metrics below are computed over.
    pub evaluated_windows: usize,
    /// Windows corrupted across the whole test set.
    pub injected_windows: usize,
    pub calibration_windows: usize,
    pub lambda: f64,
    pub receptive_field: usize,
    pub metrics: DetectionReport,
}

pub fn write_report(path: &Path, report: &ReportFile) -> Result<()> {
    write_json(path, report)
}

pub fn read_report(path: &Path) -> Result<ReportFile> {
    let r: ReportFile = read_json(path, Stage::Report)?;
    check_version(r.version, path, Stage::Report)?;
    Ok(r)
}

/// ROC points as `fpr,tpr,threshold`; infinite thresholds print as `inf` / `-inf`.
pub fn write_roc_csv(path: &Path, points: &[RocPoint]) -> Result<()> {
    let mut out = create(path)?;
    let mut body = String::from("fpr,tpr,threshold\n");
    for p in points {
        body.push_str(&format!("{},{},{}\n", p.fpr, p.tpr, p.threshold));
    }
    out.write_all(body.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(Stage::Io, path, e))
}

pub fn read_roc_csv(path: &Path) -> Result<Vec<RocPoint>> {
    let mut rdr = csv::Reader::from_reader(open(path, Stage::Report)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(Stage::Report, path, e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|c| c.parse::<f64>().ok())
                .ok_or_else(|| Error::format(Stage::Report, path, format!("bad ROC row {rec:?}")))
        };
        out.push(RocPoint {
            fpr: num(0)?,
            tpr: num(1)?,
            threshold: num(2)?,
        });
    }
    Ok(out)
}
