//! Confusion matrix, detection accuracy, ROC/AUC and per-scenario tallies.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::detector::{
    grouped_scores, separating_midpoint, ScoredWindow, ThresholdChoice, Verdict,
};
use crate::error::{CoreError, CoreResult};
use crate::scenarios::InjectionRecord;
use crate::window::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `(TP + TN) / (TP + FP + TN + FN)`.
    pub fn accuracy(&self) -> CoreResult<f64> {
        match self.total() {
            0 => Err(CoreError::UndefinedMetric(
                "accuracy of an empty confusion matrix".into(),
            )),
            t => Ok((self.tp + self.tn) as f64 / t as f64),
        }
    }

    /// Sensitivity, `TP / (TP + FN)`.
    pub fn tpr(&self) -> CoreResult<f64> {
        match self.tp + self.fn_ {
            0 => Err(CoreError::UndefinedMetric(
                "true positive rate without positives".into(),
            )),
            d => Ok(self.tp as f64 / d as f64),
        }
    }

    /// `FP / (FP + TN)`.
    pub fn fpr(&self) -> CoreResult<f64> {
        match self.fp + self.tn {
            0 => Err(CoreError::UndefinedMetric(
                "false positive rate without negatives".into(),
            )),
            d => Ok(self.fp as f64 / d as f64),
        }
    }
}

pub fn confusion_matrix(scored: &[ScoredWindow]) -> Confusion {
    let mut c = Confusion::default();
    for w in scored {
        match (w.actual.is_anomaly(), w.predicted) {
            (true, Verdict::Anomaly) => c.tp += 1,
            (true, Verdict::Normal) => c.fn_ += 1,
            (false, Verdict::Anomaly) => c.fp += 1,
            (false, Verdict::Normal) => c.tn += 1,
        }
    }
    c
}

pub fn accuracy(c: &Confusion) -> CoreResult<f64> {
    c.accuracy()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Windows with a score strictly above this value are flagged.
    #[cfg_attr(feature = "serde", serde(with = "crate::float_repr"))]
    pub threshold: f64,
}

/// ROC points from `(0, 0)` at `+inf` to `(1, 1)` at `-inf`, one per
/// distinct score, and the trapezoidal area under them.
pub fn roc_auc(scores: &[(f64, bool)]) -> CoreResult<(Vec<RocPoint>, f64)> {
    let (groups, pos, neg) = grouped_scores(scores)?;
    let mut points = Vec::with_capacity(groups.len() + 1);
    points.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    });
    let (mut tp, mut fp) = (0usize, 0usize);
    // twice the area in units of one anomaly-normal pair
    let mut area2: u128 = 0;
    for i in (0..groups.len()).rev() {
        let (s, a, n) = groups[i];
        area2 += n as u128 * (2 * tp + a) as u128;
        tp += a;
        fp += n;
        let threshold = if i == 0 {
            f64::NEG_INFINITY
        } else {
            separating_midpoint(groups[i - 1].0, s)
        };
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold,
        });
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok((points, auc))
}

/// Trapezoidal area under ROC points given in order of increasing FPR.
pub fn auc_from_points(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioTally {
    pub injected: usize,
    pub detected: usize,
    pub missed: usize,
}

impl ScenarioTally {
    pub fn miss_rate(&self) -> f64 {
        if self.injected == 0 {
            0.0
        } else {
            self.missed as f64 / self.injected as f64
        }
    }
}

/// Injected, detected and missed counts for scenarios 1 to 3 (and any other
/// scenario id present in the manifest).
pub fn per_scenario_breakdown(
    scored: &[ScoredWindow],
    manifest: &[InjectionRecord],
) -> CoreResult<BTreeMap<u8, ScenarioTally>> {
    let mut by_index = BTreeMap::new();
    for w in scored {
        by_index.insert(w.index, w);
    }
    let mut out: BTreeMap<u8, ScenarioTally> =
        (1..=3).map(|s| (s, ScenarioTally::default())).collect();
    for rec in manifest {
        let w = by_index.get(&rec.window_index).ok_or_else(|| {
            CoreError::Consistency(format!("manifest window {} has no score", rec.window_index))
        })?;
        if w.actual
            != (Label::Anomaly {
                scenario: rec.scenario,
                case: rec.case,
            })
        {
            return Err(CoreError::Consistency(format!(
                "window {} is labeled {:?} but the manifest says scenario {} case {}",
                rec.window_index, w.actual, rec.scenario, rec.case
            )));
        }
        let t = out.entry(rec.scenario).or_default();
        t.injected += 1;
        if w.predicted == Verdict::Anomaly {
            t.detected += 1;
        } else {
            t.missed += 1;
        }
    }
    let labeled = scored.iter().filter(|w| w.actual.is_anomaly()).count();
    if labeled != manifest.len() {
        return Err(CoreError::Consistency(format!(
            "{labeled} windows are labeled anomalous but the manifest lists {}",
            manifest.len()
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionReport {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub tpr: f64,
    pub fpr: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::float_repr"))]
    pub threshold: f64,
    pub g_mean: f64,
    pub auc: f64,
    pub per_scenario: BTreeMap<u8, ScenarioTally>,
    pub roc: Vec<RocPoint>,
}

impl DetectionReport {
    /// Summarizes classified windows. `scored` must already carry verdicts for `choice.threshold`.
    pub fn build(
        scored: &[ScoredWindow],
        choice: &ThresholdChoice,
        manifest: &[InjectionRecord],
    ) -> CoreResult<Self> {
        let confusion = confusion_matrix(scored);
        let pairs: Vec<(f64, bool)> = scored
            .iter()
            .map(|w| (w.md, w.actual.is_anomaly()))
            .collect();
        let (roc, auc) = roc_auc(&pairs)?;
        let tpr = confusion.tpr()?;
        let fpr = confusion.fpr()?;
        Ok(Self {
            accuracy: confusion.accuracy()?,
            confusion,
            tpr,
            fpr,
            threshold: choice.threshold,
            g_mean: libm::sqrt(tpr * (1.0 - fpr)),
            auc,
            per_scenario: per_scenario_breakdown(scored, manifest)?,
            roc,
        })
    }
}
