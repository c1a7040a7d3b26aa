//! Nine measures of posterior-estimate quality.

use serde::{Deserialize, Serialize};

use super::EtaEstimator;
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::synth::bayes_predict;

/// Test-set measures, plus the train-set boundary differences.
/// `kl` is `None` when an estimate is exactly 0 or 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaQualityReport {
    pub mse: f64,
    pub rmse: f64,
    pub mad: f64,
    /// Signed mean of estimate minus truth.
    pub md: f64,
    pub kl: Option<f64>,
    pub acc: f64,
    pub brier: f64,
    pub diff_max: Option<f64>,
    pub diff_min: Option<f64>,
    pub clamp_rate: f64,
    pub n_test: usize,
}

fn xlogy_ratio(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / q).ln()
    }
}

/// Bernoulli KL divergence, KL(truth || estimate).
pub fn bernoulli_kl(truth: f64, est: f64) -> f64 {
    xlogy_ratio(truth, est) + xlogy_ratio(1.0 - truth, 1.0 - est)
}

/// Mean squared error of estimates against {0,1} label targets.
pub fn brier(est: &[f64], labels: &[Label]) -> f64 {
    est.iter()
        .zip(labels)
        .map(|(p, y)| (p - if y.is_pos() { 1.0 } else { 0.0 }).powi(2))
        .sum::<f64>()
        / est.len().max(1) as f64
}

/// Scores the clamped estimates from one estimator.
pub fn quality_from_values(
    est: &[f64],
    truth: &[f64],
    labels: &[Label],
    clamped: usize,
    train_extremes: Option<((f64, f64), (f64, f64))>,
) -> Result<EtaQualityReport> {
    let n = est.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if truth.len() != n || labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: truth.len().min(labels.len()),
        });
    }
    let nf = n as f64;
    let diffs: Vec<f64> = est.iter().zip(truth).map(|(a, b)| a - b).collect();
    let mse = diffs.iter().map(|d| d * d).sum::<f64>() / nf;
    let mad = diffs.iter().map(|d| d.abs()).sum::<f64>() / nf;
    let md = diffs.iter().sum::<f64>() / nf;
    let kl = if est.iter().any(|&p| p <= 0.0 || p >= 1.0) {
        None
    } else {
        Some(truth.iter().zip(est).map(|(&t, &p)| bernoulli_kl(t, p)).sum::<f64>() / nf)
    };
    let acc = est
        .iter()
        .zip(labels)
        .filter(|(p, y)| bayes_predict(**p, 0.5) == **y)
        .count() as f64
        / nf;
    let (diff_max, diff_min) = match train_extremes {
        Some(((emax, emin), (tmax, tmin))) => (Some(emax - tmax), Some(emin - tmin)),
        None => (None, None),
    };
    Ok(EtaQualityReport {
        mse,
        rmse: mse.sqrt(),
        mad,
        md,
        kl,
        acc,
        brier: brier(est, labels),
        diff_max,
        diff_min,
        clamp_rate: clamped as f64 / nf,
        n_test: n,
    })
}

/// Evaluates on `test`; the boundary differences use `train` when it has true posteriors.
pub fn eval_eta(est: &EtaEstimator, train: &Dataset, test: &Dataset) -> Result<EtaQualityReport> {
    let truth = test.true_eta().ok_or(Error::MissingTrueEta)?;
    let preds = est.predict_all(test.features())?;
    let values: Vec<f64> = preds.iter().map(|p| p.value).collect();
    let clamped = preds.iter().filter(|p| p.clamped).count();
    let extremes = match train.true_eta() {
        Some(t) if !t.is_empty() => {
            let s = est.train_summary();
            let tmax = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tmin = t.iter().copied().fold(f64::INFINITY, f64::min);
            Some(((s.max_eta_on_train, s.min_eta_on_train), (tmax, tmin)))
        }
        _ => None,
    };
    quality_from_values(&values, truth, test.labels(), clamped, extremes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_estimate() {
        let t = [0.2, 0.7, 0.5];
        let y = [Label::Neg, Label::Pos, Label::Pos];
        let r = quality_from_values(&t, &t, &y, 0, None).unwrap();
        assert_eq!((r.mse, r.rmse, r.mad, r.md), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.kl, Some(0.0));
        // 0.5 predicts -1, so the third row is wrong
        assert!((r.acc - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kl_undefined_at_boundary() {
        let r = quality_from_values(&[1.0, 1.0], &[0.3, 0.9], &[Label::Pos, Label::Neg], 0, None).unwrap();
        assert!(r.kl.is_none());
    }

    #[test]
    fn constant_half_brier() {
        let y = [Label::Neg, Label::Pos, Label::Pos, Label::Neg];
        assert!((brier(&[0.5; 4], &y) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn signed_deviation() {
        let r = quality_from_values(&[0.6, 0.1], &[0.4, 0.4], &[Label::Pos, Label::Neg], 1, Some(((0.9, 0.1), (0.8, 0.05)))).unwrap();
        assert!((r.md - (-0.05)).abs() < 1e-15);
        assert!((r.mad - 0.25).abs() < 1e-15);
        assert!((r.diff_max.unwrap() - 0.1).abs() < 1e-12);
        assert!((r.diff_min.unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(r.clamp_rate, 0.5);
    }
}
