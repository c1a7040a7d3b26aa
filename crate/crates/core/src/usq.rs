//! Weighted uneven-margin squared loss and its ridge-regularized linear fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{CostParams, Dataset, Features, Label};
use crate::error::{invalid, Error, Result};
use crate::linalg;

/// f(x) = w.x + b
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(invalid("linear model has non-finite entries"));
        }
        Ok(LinearModel { w, b })
    }

    pub fn zeros(n: usize) -> Self {
        LinearModel { w: vec![0.0; n], b: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                found: x.len(),
            });
        }
        Ok(self.raw_score(x))
    }

    pub(crate) fn raw_score(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b
    }

    /// sign(w.x + b) with sign(0) = -1.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.score(x).map(Label::from_score)
    }

    pub fn scores(&self, x: &Features) -> Result<Vec<f64>> {
        if x.n_cols() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                found: x.n_cols(),
            });
        }
        Ok(x.rows().map(|r| self.raw_score(r)).collect())
    }

    pub fn predict_all(&self, x: &Features) -> Result<Vec<Label>> {
        Ok(self.scores(x)?.into_iter().map(Label::from_score).collect())
    }

    /// Squared norm of (w, b).
    pub fn norm_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>() + self.b * self.b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UsqFit {
    pub model: LinearModel,
    pub cost: CostParams,
    /// Eigenvalue ratio of the normal-equation matrix.
    pub system_condition: f64,
}

pub fn loss_usq(score: f64, label: Label, cost: &CostParams) -> f64 {
    match label {
        Label::Pos => (1.0 - cost.alpha) * (1.0 - score).powi(2),
        Label::Neg => (cost.alpha / cost.gamma) * (1.0 + cost.gamma * score).powi(2),
    }
}

/// Per-sample curvature and right-hand-side weights of the normal equations.
fn system_weights(label: Label, cost: &CostParams) -> (f64, f64) {
    match label {
        Label::Pos => (1.0 - cost.alpha, 1.0 - cost.alpha),
        Label::Neg => (cost.gamma * cost.alpha, -cost.alpha),
    }
}

/// Exact minimizer of mean loss + lambda * |(w,b)|^2.
pub fn fit_usq_closed_form(data: &Dataset, cost: &CostParams) -> Result<UsqFit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.n_features();
    let d = n + 1;
    let m = data.len() as f64;
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut c = DVector::<f64>::zeros(d);
    let mut xb = vec![1.0; d];
    for (i, &y) in data.labels().iter().enumerate() {
        xb[..n].copy_from_slice(data.row(i));
        let (ai, ci) = system_weights(y, cost);
        for r in 0..d {
            let s = ai * xb[r];
            c[r] += ci * xb[r];
            for k in 0..=r {
                a[(r, k)] += s * xb[k];
            }
        }
    }
    for r in 0..d {
        for k in 0..r {
            a[(k, r)] = a[(r, k)];
        }
    }
    a /= m;
    c /= m;
    for r in 0..d {
        a[(r, r)] += cost.lambda;
    }
    let condition = linalg::symmetric_condition(&a);
    let sol = linalg::solve_spd(&a, &c)
        .map_err(|_| Error::IllConditioned { condition })?;
    let model = LinearModel::new(sol.as_slice()[..n].to_vec(), sol[n])
        .map_err(|_| Error::IllConditioned { condition })?;
    Ok(UsqFit {
        model,
        cost: *cost,
        system_condition: condition,
    })
}

/// Mean loss over the sample, optionally plus the ridge term.
pub fn empirical_risk_usq(
    data: &Dataset,
    model: &LinearModel,
    cost: &CostParams,
    with_regularizer: bool,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scores = model.scores(data.features())?;
    let total: f64 = scores
        .iter()
        .zip(data.labels())
        .map(|(&s, &y)| loss_usq(s, y, cost))
        .sum();
    let reg = if with_regularizer {
        cost.lambda * model.norm_sq()
    } else {
        0.0
    };
    Ok(total / data.len() as f64 + reg)
}
