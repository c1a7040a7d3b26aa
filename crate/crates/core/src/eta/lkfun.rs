//! Posterior estimates from a linear classifier trained on a proper composite loss.

use nalgebra::{DMatrix, DVector};

use super::{EtaEstimator, EtaMethod, Fitted, LossKind};
use crate::data::{cv_pairs, Dataset, Label};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::rng::{self, tag};
use crate::synth::logistic;
use crate::usq::LinearModel;

const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100_000;

#[derive(Clone, Debug)]
pub(crate) struct LinkModel {
    pub model: LinearModel,
    pub loss: LossKind,
    pub lambda: f64,
}

impl LinkModel {
    pub fn raw(&self, x: &[f64]) -> f64 {
        inverse_link(self.loss, self.model.raw_score(x))
    }
}

/// Maps a classifier score to a posterior estimate.
pub fn inverse_link(loss: LossKind, f: f64) -> f64 {
    match loss {
        LossKind::Logistic => logistic(f),
        LossKind::Squared => (1.0 + f) / 2.0,
        LossKind::ModSquared => (1.0 + f.clamp(-1.0, 1.0)) / 2.0,
        LossKind::Exponential => logistic(2.0 * f),
    }
}

/// Loss value and derivative at margin z = y f.
fn margin_loss(loss: LossKind, z: f64) -> (f64, f64) {
    match loss {
        LossKind::Logistic => {
            let ln2 = std::f64::consts::LN_2;
            // log(1 + e^-z) computed without overflow
            let v = if z > 0.0 {
                (-z).exp().ln_1p()
            } else {
                -z + z.exp().ln_1p()
            };
            (v / ln2, -logistic(-z) / ln2)
        }
        LossKind::Squared => ((1.0 - z).powi(2), -2.0 * (1.0 - z)),
        LossKind::ModSquared => {
            let h = (1.0 - z).max(0.0);
            (h * h, -2.0 * h)
        }
        LossKind::Exponential => {
            let e = (-z).exp();
            (e, -e)
        }
    }
}

struct Problem<'a> {
    data: &'a Dataset,
    loss: LossKind,
    lambda: f64,
}

impl Problem<'_> {
    /// Objective and gradient at w (intercept last).
    fn eval(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.data.n_features();
        let m = self.data.len() as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (i, &y) in self.data.labels().iter().enumerate() {
            let x = self.data.row(i);
            let f = w[..n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[n];
            let yv = y.value();
            let (l, dl) = margin_loss(self.loss, yv * f);
            total += l;
            let s = dl * yv / m;
            for j in 0..n {
                grad[j] += s * x[j];
            }
            grad[n] += s;
        }
        let mut reg = 0.0;
        for (g, v) in grad.iter_mut().zip(w) {
            *g += 2.0 * self.lambda * v;
            reg += v * v;
        }
        total / m + self.lambda * reg
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Gradient descent with Barzilai-Borwein steps and an Armijo safeguard.
fn minimize(p: &Problem<'_>) -> Result<Vec<f64>> {
    let d = p.data.n_features() + 1;
    let mut w = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut fval = p.eval(&w, &mut g);
    let mut step = 1.0 / (1.0 + 2.0 * p.lambda);
    let mut w_new = vec![0.0; d];
    let mut g_new = vec![0.0; d];
    for _ in 0..MAX_ITER {
        let gn = norm(&g);
        if gn <= GRAD_TOL {
            return Ok(w);
        }
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            for k in 0..d {
                w_new[k] = w[k] - t * g[k];
            }
            let f_new = p.eval(&w_new, &mut g_new);
            let slack = 4.0 * f64::EPSILON * fval.abs();
            if f_new.is_finite() && f_new <= fval - 1e-4 * t * gn * gn + slack {
                fval = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no representable descent left
            return if gn <= 1e3 * GRAD_TOL {
                Ok(w)
            } else {
                Err(Error::NonConvergence {
                    iterations: MAX_ITER,
                    grad_norm: gn,
                })
            };
        }
        let mut sy = 0.0;
        let mut ss = 0.0;
        for k in 0..d {
            let s = w_new[k] - w[k];
            sy += s * (g_new[k] - g[k]);
            ss += s * s;
        }
        step = if sy > 0.0 { ss / sy } else { t * 2.0 };
        std::mem::swap(&mut w, &mut w_new);
        std::mem::swap(&mut g, &mut g_new);
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITER,
        grad_norm: norm(&g),
    })
}

/// Exact minimizer of mean (1 - y f)^2 + lambda |(w,b)|^2.
fn squared_closed_form(data: &Dataset, lambda: f64) -> Result<Vec<f64>> {
    let n = data.n_features();
    let d = n + 1;
    let m = data.len() as f64;
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut c = DVector::<f64>::zeros(d);
    let mut xb = vec![1.0; d];
    for (i, &y) in data.labels().iter().enumerate() {
        xb[..n].copy_from_slice(data.row(i));
        for r in 0..d {
            c[r] += y.value() * xb[r] / m;
            for k in 0..d {
                a[(r, k)] += xb[r] * xb[k] / m;
            }
        }
    }
    for r in 0..d {
        a[(r, r)] += lambda;
    }
    Ok(linalg::solve_spd(&a, &c)?.as_slice().to_vec())
}

pub(crate) fn fit_link_model(data: &Dataset, loss: LossKind, lambda: f64) -> Result<LinkModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda {lambda} must be finite and nonnegative")));
    }
    data.require_both_classes()?;
    let w = match loss {
        LossKind::Squared => squared_closed_form(data, lambda)?,
        _ => minimize(&Problem { data, loss, lambda })?,
    };
    let n = data.n_features();
    Ok(LinkModel {
        model: LinearModel::new(w[..n].to_vec(), w[n])?,
        loss,
        lambda,
    })
}

/// Fits one regularized linear classifier and wraps its inverse link.
pub fn fit_lkfun(data: &Dataset, loss: LossKind, lambda: f64) -> Result<EtaEstimator> {
    let model = fit_link_model(data, loss, lambda)?;
    EtaEstimator::new(EtaMethod::LkFun(loss), Fitted::Link(model), data.features())
}

pub(crate) fn brier_on(model: &LinkModel, data: &Dataset, idx: &[usize]) -> f64 {
    idx.iter()
        .map(|&i| {
            let p = model.raw(data.row(i)).clamp(0.0, 1.0);
            let t = if data.labels()[i] == Label::Pos { 1.0 } else { 0.0 };
            (p - t).powi(2)
        })
        .sum::<f64>()
        / idx.len() as f64
}

/// Picks lambda by held-out Brier score, then refits on all rows.
pub fn fit_lkfun_cv(data: &Dataset, loss: LossKind, lambdas: &[f64], folds: usize, seed: u64) -> Result<EtaEstimator> {
    let lambda = match lambdas {
        [] => return Err(invalid("empty lambda grid")),
        [only] => *only,
        _ => {
            let mut r = rng::stream(seed, &[tag::FOLDS]);
            let pairs = cv_pairs(data.labels(), folds.min(data.len()), true, &mut r)?;
            let mut best = (f64::INFINITY, lambdas[0]);
            for &lam in lambdas {
                let mut total = 0.0;
                for (fit, held) in &pairs {
                    total += match fit_link_model(&data.subset(fit), loss, lam) {
                        Ok(m) => brier_on(&m, data, held),
                        Err(_) => f64::INFINITY,
                    };
                }
                if total < best.0 {
                    best = (total, lam);
                }
            }
            best.1
        }
    };
    fit_lkfun(data, loss, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CostParams, Features};
    use crate::usq::fit_usq_closed_form;

    fn toy() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.7).sin() * 2.0, (t * 0.3).cos()]
            })
            .collect();
        let labels = rows
            .iter()
            .enumerate()
            .map(|(i, r)| if r[0] + 0.3 * r[1] > 0.2 || i % 7 == 0 { Label::Pos } else { Label::Neg })
            .collect();
        Dataset::new(Features::from_rows(&rows).unwrap(), labels, None, "toy").unwrap()
    }

    #[test]
    fn inverse_links() {
        assert_eq!(inverse_link(LossKind::Logistic, 0.0), 0.5);
        assert_eq!(inverse_link(LossKind::Squared, 0.5), 0.75);
        assert!((inverse_link(LossKind::Exponential, 0.347) - 1.0 / (1.0 + (-0.694f64).exp())).abs() < 1e-15);
        assert!((inverse_link(LossKind::Exponential, 0.347) - 0.6669).abs() < 1e-4);
        assert_eq!(inverse_link(LossKind::ModSquared, 3.0), 1.0);
        assert_eq!(inverse_link(LossKind::ModSquared, -3.0), 0.0);
    }

    #[test]
    fn margin_derivatives_match_differences() {
        for loss in [LossKind::Logistic, LossKind::Squared, LossKind::ModSquared, LossKind::Exponential] {
            for z in [-2.0, -0.3, 0.4, 0.9, 2.5] {
                let h = 1e-6;
                let num = (margin_loss(loss, z + h).0 - margin_loss(loss, z - h).0) / (2.0 * h);
                assert!((num - margin_loss(loss, z).1).abs() < 1e-6, "{loss:?} {z}");
            }
        }
    }

    #[test]
    fn squared_matches_usq_at_half_cost() {
        let d = toy();
        let lam = 0.02;
        let link = fit_link_model(&d, LossKind::Squared, 2.0 * lam).unwrap();
        let usq = fit_usq_closed_form(&d, &CostParams::new(0.5, 1.0, lam).unwrap()).unwrap();
        for (a, b) in link.model.w.iter().zip(&usq.model.w) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((link.model.b - usq.model.b).abs() < 1e-10);
    }

    #[test]
    fn iterative_fit_reaches_stationary_point() {
        let d = toy();
        for loss in [LossKind::Logistic, LossKind::ModSquared, LossKind::Exponential] {
            let m = fit_link_model(&d, loss, 0.01).unwrap();
            let mut w = m.model.w.clone();
            w.push(m.model.b);
            let mut g = vec![0.0; 3];
            Problem { data: &d, loss, lambda: 0.01 }.eval(&w, &mut g);
            assert!(norm(&g) < 1e-6, "{loss:?}");
        }
    }

    #[test]
    fn one_class_rejected() {
        let d = Dataset::new(
            Features::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            vec![Label::Pos, Label::Pos],
            None,
            "p",
        )
        .unwrap();
        assert!(fit_lkfun(&d, LossKind::Logistic, 0.1).is_err());
    }
}
