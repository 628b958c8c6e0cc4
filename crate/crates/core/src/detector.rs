//! Mahalanobis-distance anomaly scoring over forecast errors.
//!
//! Training errors `y - y_hat` are modelled as a multivariate Gaussian. A test
//! window is flagged when the Mahalanobis distance of its error exceeds a
//! threshold picked on the ROC curve by the geometric mean of sensitivity and
//! specificity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};
use crate::linalg;
use crate::window::Label;

/// Ridge added to the covariance diagonal, relative to `trace / P`.
pub const DEFAULT_RELATIVE_RIDGE: f64 = 1e-6;
/// Lower bound on the ridge so degenerate (all-equal) errors stay invertible.
pub const MIN_RIDGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub mu: Vec<f64>,
    /// Unbiased sample covariance, row-major P x P, without the ridge.
    pub sigma: Vec<f64>,
    pub lambda: f64,
    pub threshold: Option<f64>,
    chol: Vec<f64>,
    sigma_inv: Vec<f64>,
}

impl ErrorModel {
    pub fn fit(errors: &[f64], dim: usize) -> CoreResult<Self> {
        Self::fit_with_ridge(errors, dim, DEFAULT_RELATIVE_RIDGE)
    }

    pub fn fit_with_ridge(errors: &[f64], dim: usize, relative_ridge: f64) -> CoreResult<Self> {
        if dim == 0 || errors.len() % dim != 0 || errors.is_empty() {
            return Err(CoreError::shape(
                format!("N x {dim} errors"),
                format!("{} values", errors.len()),
            ));
        }
        if errors.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Data(
                "prediction errors contain non-finite values".into(),
            ));
        }
        let n = errors.len() / dim;
        let mut mu = vec![0.0; dim];
        for row in errors.chunks_exact(dim) {
            for (m, v) in mu.iter_mut().zip(row) {
                *m += v;
            }
        }
        mu.iter_mut().for_each(|m| *m /= n as f64);

        let mut sigma = vec![0.0; dim * dim];
        if n > 1 {
            let mut d = vec![0.0; dim];
            for row in errors.chunks_exact(dim) {
                for ((di, v), m) in d.iter_mut().zip(row).zip(&mu) {
                    *di = v - m;
                }
                for i in 0..dim {
                    for j in 0..=i {
                        sigma[i * dim + j] += d[i] * d[j];
                    }
                }
            }
            let denom = (n - 1) as f64;
            for i in 0..dim {
                for j in 0..=i {
                    let v = sigma[i * dim + j] / denom;
                    sigma[i * dim + j] = v;
                    sigma[j * dim + i] = v;
                }
            }
        }
        let trace: f64 = (0..dim).map(|i| sigma[i * dim + i]).sum();
        let lambda = (relative_ridge * trace / dim as f64).max(MIN_RIDGE);
        Self::from_parts(mu, sigma, lambda, None)
    }

    /// Rebuilds a model from its persisted fields.
    pub fn from_parts(
        mu: Vec<f64>,
        sigma: Vec<f64>,
        lambda: f64,
        threshold: Option<f64>,
    ) -> CoreResult<Self> {
        let dim = mu.len();
        if sigma.len() != dim * dim {
            return Err(CoreError::shape(
                format!("{dim} x {dim} covariance"),
                format!("{} values", sigma.len()),
            ));
        }
        let mut reg = sigma.clone();
        for i in 0..dim {
            reg[i * dim + i] += lambda;
        }
        let chol = linalg::cholesky(&reg, dim).ok_or(CoreError::Singular { lambda })?;
        let sigma_inv = linalg::cholesky_inverse(&chol, dim);
        Ok(Self {
            mu,
            sigma,
            lambda,
            threshold,
            chol,
            sigma_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Inverse of `sigma + lambda I`.
    pub fn sigma_inv(&self) -> &[f64] {
        &self.sigma_inv
    }

    /// `sqrt((z - mu)^T (sigma + lambda I)^-1 (z - mu))` via the Cholesky factor.
    pub fn mahalanobis(&self, zeta: &[f64]) -> CoreResult<f64> {
        let p = self.dim();
        if zeta.len() != p {
            return Err(CoreError::shape(
                format!("{p}-vector"),
                format!("{}-vector", zeta.len()),
            ));
        }
        let mut d: Vec<f64> = zeta.iter().zip(&self.mu).map(|(z, m)| z - m).collect();
        linalg::forward_substitute(&self.chol, p, &mut d);
        Ok(libm::sqrt(d.iter().map(|v| v * v).sum()))
    }

    /// Distances for a row-major block of error vectors.
    pub fn score_rows(&self, errors: &[f64]) -> CoreResult<Vec<f64>> {
        let p = self.dim();
        if errors.len() % p != 0 {
            return Err(CoreError::shape(
                format!("N x {p} errors"),
                format!("{} values", errors.len()),
            ));
        }
        errors
            .chunks_exact(p)
            .map(|z| self.mahalanobis(z))
            .collect()
    }
}

pub fn fit_error_model(train_errors: &[f64], dim: usize) -> CoreResult<ErrorModel> {
    ErrorModel::fit(train_errors, dim)
}

pub fn mahalanobis(zeta: &[f64], em: &ErrorModel) -> CoreResult<f64> {
    em.mahalanobis(zeta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    #[default]
    Normal,
    Anomaly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredWindow {
    pub index: usize,
    pub md: f64,
    pub actual: Label,
    pub predicted: Verdict,
}

/// Operating point picked by [`select_threshold`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub g_mean: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Midpoint of two consecutive distinct scores that still separates them under `>`.
pub(crate) fn separating_midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Distinct score values ascending, with (anomaly, normal) counts per value.
pub(crate) fn grouped_scores(
    scores: &[(f64, bool)],
) -> CoreResult<(Vec<(f64, usize, usize)>, usize, usize)> {
    if scores.iter().any(|(s, _)| s.is_nan()) {
        return Err(CoreError::Data("scores contain NaN".into()));
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for (s, anom) in sorted {
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                if anom {
                    g.1 += 1
                } else {
                    g.2 += 1
                }
            }
            _ => groups.push((s, anom as usize, (!anom) as usize)),
        }
    }
    let pos = groups.iter().map(|g| g.1).sum();
    let neg = groups.iter().map(|g| g.2).sum();
    if pos == 0 || neg == 0 {
        return Err(CoreError::Labeling(format!(
            "need both classes, got {pos} anomalous and {neg} normal windows"
        )));
    }
    Ok((groups, pos, neg))
}

/// Threshold maximizing `sqrt(TPR * (1 - FPR))` over the midpoints between
/// consecutive distinct scores plus the two infinite sentinels. Ties go to
/// the larger threshold.
pub fn select_threshold(scores: &[ScoredWindow]) -> CoreResult<ThresholdChoice> {
    let pairs: Vec<(f64, bool)> = scores
        .iter()
        .map(|s| (s.md, s.actual.is_anomaly()))
        .collect();
    select_threshold_raw(&pairs)
}

pub fn select_threshold_raw(scores: &[(f64, bool)]) -> CoreResult<ThresholdChoice> {
    let (groups, pos, neg) = grouped_scores(scores)?;
    // sweep from T = -inf (everything flagged) upwards
    let (mut tp, mut fp) = (pos, neg);
    let mut best = (0u128, f64::NEG_INFINITY, tp, fp);
    let consider = |tp: usize, fp: usize, t: f64, best: &mut (u128, f64, usize, usize)| {
        let score = tp as u128 * (neg - fp) as u128;
        if score >= best.0 {
            *best = (score, t, tp, fp);
        }
    };
    consider(tp, fp, f64::NEG_INFINITY, &mut best);
    for (i, &(s, a, n)) in groups.iter().enumerate() {
        tp -= a;
        fp -= n;
        let t = match groups.get(i + 1) {
            Some(&(next, _, _)) => separating_midpoint(s, next),
            None => f64::INFINITY,
        };
        consider(tp, fp, t, &mut best);
    }
    let (_, threshold, tp, fp) = best;
    let tpr = tp as f64 / pos as f64;
    let fpr = fp as f64 / neg as f64;
    Ok(ThresholdChoice {
        threshold,
        g_mean: libm::sqrt(tpr * (1.0 - fpr)),
        tpr,
        fpr,
    })
}

/// Flags every window whose distance strictly exceeds `threshold`.
pub fn classify(scores: &mut [ScoredWindow], threshold: f64) {
    for s in scores {
        s.predicted = if s.md > threshold {
            Verdict::Anomaly
        } else {
            Verdict::Normal
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scored(md: &[f64], anomaly: &[bool]) -> Vec<ScoredWindow> {
        md.iter()
            .zip(anomaly)
            .enumerate()
            .map(|(index, (&md, &a))| ScoredWindow {
                index,
                md,
                actual: if a {
                    Label::Anomaly {
                        scenario: 1,
                        case: 2,
                    }
                } else {
                    Label::Normal
                },
                predicted: Verdict::Normal,
            })
            .collect()
    }

    #[test]
    fn degenerate_errors_use_ridge() {
        let errs = [1.5, -2.0].repeat(10);
        let em = ErrorModel::fit(&errs, 2).unwrap();
        assert_eq!(em.mu, vec![1.5, -2.0]);
        assert!(em.sigma.iter().all(|&v| v == 0.0));
        assert_eq!(em.lambda, MIN_RIDGE);
        let inv = em.sigma_inv();
        assert!((inv[0] * em.lambda - 1.0).abs() < 1e-9);
        assert!((inv[3] * em.lambda - 1.0).abs() < 1e-9);
        assert_eq!(inv[1], 0.0);
        assert_eq!(em.mahalanobis(&[1.5, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_covariance() {
        let errs = [1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0];
        let em = ErrorModel::fit(&errs, 2).unwrap();
        assert_eq!(em.mu, vec![0.0, 0.0]);
        let two_thirds = 2.0 / 3.0;
        for (got, want) in em.sigma.iter().zip([two_thirds, 0.0, 0.0, two_thirds]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn permutation_invariant() {
        let errs = [1.0, 2.0, 3.0, -1.0, 0.5, 0.25, -2.0, 1.0];
        let mut rev: Vec<f64> = errs.chunks(2).rev().flatten().copied().collect();
        let a = ErrorModel::fit(&errs, 2).unwrap();
        let b = ErrorModel::fit(&rev, 2).unwrap();
        for (x, y) in a.mu.iter().zip(&b.mu).chain(a.sigma.iter().zip(&b.sigma)) {
            assert!((x - y).abs() < 1e-14);
        }
        rev.clear();
    }

    #[test]
    fn euclidean_specialization() {
        let em =
            ErrorModel::from_parts(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], 0.0, None).unwrap();
        assert_eq!(em.mahalanobis(&[3.0, 4.0]).unwrap(), 5.0);
        assert!(matches!(
            em.mahalanobis(&[1.0]),
            Err(CoreError::Shape { .. })
        ));
    }

    #[test]
    fn non_finite_errors_rejected() {
        assert!(matches!(
            ErrorModel::fit(&[1.0, f64::NAN], 1),
            Err(CoreError::Data(_))
        ));
    }

    #[test]
    fn indefinite_covariance_is_singular() {
        let r = ErrorModel::from_parts(vec![0.0, 0.0], vec![1.0, 2.0, 2.0, 1.0], 1e-9, None);
        assert!(matches!(r, Err(CoreError::Singular { .. })));
    }

    #[test]
    fn perfectly_separable_threshold() {
        let s = scored(&[10.0, 12.0, 1.0, 2.0], &[true, true, false, false]);
        let c = select_threshold(&s).unwrap();
        assert_eq!(c.threshold, 6.0);
        assert_eq!(c.g_mean, 1.0);
        let mut s = s;
        classify(&mut s, c.threshold);
        assert!(s
            .iter()
            .all(|w| (w.predicted == Verdict::Anomaly) == w.actual.is_anomaly()));
    }

    #[test]
    fn identical_scores() {
        let s = scored(&[5.0, 5.0], &[false, true]);
        let c = select_threshold(&s).unwrap();
        assert!(c.g_mean <= libm::sqrt(0.5));
        assert_eq!(c.threshold, f64::INFINITY);
        assert_eq!(select_threshold(&s).unwrap(), c);
    }

    #[test]
    fn single_class_is_labeling_error() {
        let s = scored(&[1.0, 2.0], &[false, false]);
        assert!(matches!(select_threshold(&s), Err(CoreError::Labeling(_))));
    }

    #[test]
    fn strict_boundary() {
        let mut s = scored(&[9.61, 10.0, 3.0], &[false, true, false]);
        classify(&mut s, 9.61);
        assert_eq!(s[0].predicted, Verdict::Normal);
        assert_eq!(s[1].predicted, Verdict::Anomaly);
        classify(&mut s, f64::INFINITY);
        assert!(s.iter().all(|w| w.predicted == Verdict::Normal));
    }

    #[test]
    fn adjacent_floats_still_separate() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = separating_midpoint(lo, hi);
        assert!(hi > t && !(lo > t));
    }

    #[test]
    fn training_percentile_below_threshold_on_clean_fit() {
        // Gaussian-ish training errors; anomalies far outside
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = 3;
        let train: Vec<f64> = (0..3000 * p).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let em = ErrorModel::fit(&train, p).unwrap();
        let mut train_md = em.score_rows(&train).unwrap();
        assert!(train_md.iter().all(|v| v.is_finite()));
        train_md.sort_by(f64::total_cmp);
        let p99 = train_md[train_md.len() * 99 / 100];

        let mut pairs: Vec<(f64, bool)> = Vec::new();
        for i in 0..400 {
            let anomalous = i % 5 == 0;
            let mut z: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.1..0.1)).collect();
            if anomalous {
                z[i % p] += 1.0;
            }
            pairs.push((em.mahalanobis(&z).unwrap(), anomalous));
        }
        let c = select_threshold_raw(&pairs).unwrap();
        assert!(p99 < c.threshold, "p99 {p99} vs T {}", c.threshold);
    }

    proptest! {
        #[test]
        fn raising_threshold_is_monotone(
            md in proptest::collection::vec(0.0f64..20.0, 5..60),
            t1 in 0.0f64..20.0,
            dt in 0.0f64..5.0,
        ) {
            let labels: Vec<bool> = (0..md.len()).map(|i| i % 3 == 0).collect();
            let mut a = scored(&md, &labels);
            let mut b = a.clone();
            classify(&mut a, t1);
            classify(&mut b, t1 + dt);
            let count = |s: &[ScoredWindow], anom: bool, pred: Verdict| {
                s.iter().filter(|w| w.actual.is_anomaly() == anom && w.predicted == pred).count()
            };
            prop_assert!(count(&b, false, Verdict::Anomaly) <= count(&a, false, Verdict::Anomaly));
            prop_assert!(count(&b, true, Verdict::Normal) >= count(&a, true, Verdict::Normal));
        }

        #[test]
        fn affine_invariance(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = 3;
            let errs: Vec<f64> = (0..200 * p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // random well-conditioned linear map A = I + small noise
            let a: Vec<f64> = (0..p * p)
                .map(|k| if k % (p + 1) == 0 { 1.0 } else { 0.0 } + rng.gen_range(-0.3..0.3))
                .collect();
            let shift: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let map = |z: &[f64]| -> Vec<f64> {
                (0..p).map(|i| (0..p).map(|j| a[i * p + j] * z[j]).sum::<f64>() + shift[i]).collect()
            };
            let mapped: Vec<f64> = errs.chunks(p).flat_map(|z| map(z)).collect();
            let em1 = ErrorModel::fit_with_ridge(&errs, p, 0.0).unwrap();
            let em2 = ErrorModel::fit_with_ridge(&mapped, p, 0.0).unwrap();
            let z: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let d1 = em1.mahalanobis(&z).unwrap();
            let d2 = em2.mahalanobis(&map(&z)).unwrap();
            prop_assert!((d1 - d2).abs() <= 1e-6 * d1.max(1.0));
        }
    }
}
