//! Density-ratio fitting by KL importance estimation, and the posterior
//! estimates built from a pair of class-conditional ratios.

use rayon::prelude::*;

use super::kernel::{design_from_distances, distance_table, pick_centers, KernelBasis};
use super::{EtaEstimator, EtaMethod, Fitted, KliepVariant};
use crate::data::{kfold, Dataset, Features, Label};
use crate::error::{invalid, Error, Result};
use crate::rng::{self, tag};

const MAX_ITER: usize = 10_000;
const MAX_WIDENINGS: usize = 30;
/// Iterations between progress checks.
const WINDOW: usize = 20;
/// Relative objective gain per window below which ascent stops.
const REL_TOL: f64 = 1e-7;

/// w(x) = sum_l alpha_l phi_l(x), fitted so its mean over all points is one.
#[derive(Clone, Debug)]
pub struct DensityRatio {
    pub basis: KernelBasis,
    pub alpha: Vec<f64>,
    pub numerator: Label,
    /// |sum of w over the denominator sample - its size|
    pub residual: f64,
}

impl DensityRatio {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.basis.weighted_sum(&self.alpha, x)
    }

    pub fn dim(&self) -> usize {
        self.basis.centers.n_cols()
    }
}

/// Row-major design (rows x b).
struct Design {
    vals: Vec<f64>,
    b: usize,
}

impl Design {
    fn new(dist: &[f64], b: usize, sigma: f64) -> Self {
        Design {
            vals: design_from_distances(dist, sigma),
            b,
        }
    }

    fn rows(&self) -> usize {
        self.vals.len() / self.b
    }

    fn mul(&self, a: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.vals.chunks(self.b).map(|r| r.iter().zip(a).map(|(p, q)| p * q).sum::<f64>()));
    }

    fn col_means(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.b];
        for r in self.vals.chunks(self.b) {
            for (a, v) in s.iter_mut().zip(r) {
                *a += v;
            }
        }
        let n = self.rows() as f64;
        s.iter_mut().for_each(|v| *v /= n);
        s
    }
}

fn mean_log(v: &[f64]) -> f64 {
    v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64
}

/// Projected gradient ascent on mean log w over the numerator rows,
/// keeping alpha >= 0 and bvec.alpha = 1. Returns None when some numerator
/// row has no basis mass.
fn ascend(nu: &Design, bvec: &[f64]) -> Option<Vec<f64>> {
    let b = nu.b;
    let total: f64 = bvec.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut alpha = vec![1.0 / total; b];
    let mut fx = Vec::new();
    nu.mul(&alpha, &mut fx);
    if fx.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let mut obj = mean_log(&fx);
    let n = nu.rows() as f64;
    let mut step = 1e-3 / total.max(1e-300);
    let mut grad = vec![0.0; b];
    let mut cand = vec![0.0; b];
    let mut fc = Vec::new();
    let mut dir = vec![0.0; b];
    let mut free = vec![true; b];
    let mut checkpoint = obj;
    for it in 1..=MAX_ITER {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (r, &f) in nu.vals.chunks(b).zip(&fx) {
            let s = 1.0 / (f * n);
            for (g, p) in grad.iter_mut().zip(r) {
                *g += s * p;
            }
        }
        // tangent to the constraint plane, over coordinates free to move
        free.iter_mut().for_each(|f| *f = true);
        loop {
            let (mut gq, mut qq) = (0.0, 0.0);
            for l in (0..b).filter(|&l| free[l]) {
                gq += grad[l] * bvec[l];
                qq += bvec[l] * bvec[l];
            }
            let shift = if qq > 0.0 { gq / qq } else { 0.0 };
            let mut changed = false;
            for l in 0..b {
                dir[l] = if free[l] { grad[l] - shift * bvec[l] } else { 0.0 };
                if free[l] && alpha[l] <= 0.0 && dir[l] < 0.0 {
                    free[l] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut moved = false;
        while step > 1e-300 {
            for l in 0..b {
                cand[l] = (alpha[l] + step * dir[l]).max(0.0);
            }
            let scale: f64 = cand.iter().zip(bvec).map(|(a, q)| a * q).sum();
            if scale > 0.0 {
                cand.iter_mut().for_each(|a| *a /= scale);
                nu.mul(&cand, &mut fc);
                if fc.iter().all(|&v| v > 0.0) {
                    let o = mean_log(&fc);
                    if o > obj {
                        std::mem::swap(&mut alpha, &mut cand);
                        std::mem::swap(&mut fx, &mut fc);
                        obj = o;
                        step *= 2.0;
                        moved = true;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        if it % WINDOW == 0 {
            if obj - checkpoint <= REL_TOL * (1.0 + obj.abs()) {
                break;
            }
            checkpoint = obj;
        }
    }
    Some(alpha)
}

/// Ratio for one width; the width doubles until every numerator row has mass.
fn fit_width(nu: &Features, de: &Features, centers: &Features, sigma: f64) -> Result<(Vec<f64>, f64)> {
    let dnu = distance_table(nu, centers);
    let dde = distance_table(de, centers);
    let b = centers.n_rows();
    let mut s = sigma;
    for _ in 0..MAX_WIDENINGS {
        let bvec = Design::new(&dde, b, s).col_means();
        if let Some(alpha) = ascend(&Design::new(&dnu, b, s), &bvec) {
            return Ok((alpha, s));
        }
        s *= 2.0;
    }
    Err(Error::DegenerateEstimate(format!(
        "density ratio objective stayed infinite up to width {s}"
    )))
}

/// Fits the ratio p(x | y = numerator) / p(x), using all rows as the
/// denominator sample. The width is chosen by held-out mean log ratio.
pub fn fit_kliep(
    data: &Dataset,
    numerator: Label,
    sigmas: &[f64],
    max_centers: usize,
    cv_folds: usize,
    seed: u64,
) -> Result<DensityRatio> {
    if sigmas.is_empty() || sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(invalid("density ratio widths must be positive"));
    }
    let nu_idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == numerator).collect();
    if nu_idx.is_empty() {
        return Err(Error::MissingClass(numerator));
    }
    let nu = data.features().select(&nu_idx);
    let de = data.features();
    let path = numerator.as_int() as u64;
    let cidx = pick_centers(nu.n_rows(), max_centers, seed, &[path]);
    let centers = nu.select(&cidx);

    let k = cv_folds.min(nu.n_rows());
    let sigma = if sigmas.len() == 1 || k < 2 {
        sigmas[sigmas.len() / 2]
    } else {
        let dummy = vec![numerator; nu.n_rows()];
        let mut r = rng::stream(seed, &[tag::FOLDS, path]);
        let folds = kfold(&dummy, k, false, &mut r)?;
        let cv: Vec<f64> = sigmas
            .par_iter()
            .map(|&s| {
                let mut score = 0.0;
                for held in &folds {
                    let mut mask = vec![false; nu.n_rows()];
                    held.iter().for_each(|&i| mask[i] = true);
                    let fit: Vec<usize> = (0..nu.n_rows()).filter(|&i| !mask[i]).collect();
                    score += match fit_width(&nu.select(&fit), de, &centers, s) {
                        Ok((alpha, used)) => {
                            let basis = KernelBasis { centers: centers.clone(), sigma: used };
                            held.iter()
                                .map(|&i| basis.weighted_sum(&alpha, nu.row(i)).ln())
                                .sum::<f64>()
                                / held.len() as f64
                        }
                        Err(_) => f64::NEG_INFINITY,
                    };
                }
                score
            })
            .collect();
        let mut best = (f64::NEG_INFINITY, sigmas[0]);
        for (&s, &score) in sigmas.iter().zip(&cv) {
            if score > best.0 {
                best = (score, s);
            }
        }
        best.1
    };
    let (alpha, used) = fit_width(&nu, de, &centers, sigma)?;
    let basis = KernelBasis::new(centers, used)?;
    let total: f64 = de.rows().map(|x| basis.weighted_sum(&alpha, x)).sum();
    Ok(DensityRatio {
        residual: (total - de.n_rows() as f64).abs(),
        basis,
        alpha,
        numerator,
    })
}

#[derive(Clone, Debug)]
pub(crate) struct KliepEta {
    pos: DensityRatio,
    neg: DensityRatio,
    pi: f64,
    variant: KliepVariant,
    max_pos: f64,
    max_neg: f64,
    max_neg_complement: f64,
}

impl KliepEta {
    pub fn widths(&self) -> (f64, f64) {
        (self.pos.basis.sigma, self.neg.basis.sigma)
    }

    pub fn dim(&self) -> usize {
        self.pos.dim()
    }

    pub fn ratios(&self) -> (&DensityRatio, &DensityRatio) {
        (&self.pos, &self.neg)
    }

    /// Class-weighted ratios, approximately P(Y=+1|x) and P(Y=-1|x).
    fn parts(&self, x: &[f64]) -> (f64, f64) {
        (self.pos.eval(x) * self.pi, self.neg.eval(x) * (1.0 - self.pi))
    }

    pub fn raw(&self, x: &[f64]) -> Result<f64> {
        let (qp, qn) = self.parts(x);
        let ratio = |a: f64, b: f64| {
            if a + b > 0.0 {
                Ok(a / (a + b))
            } else {
                Err(Error::DegenerateEstimate("both class ratios vanish".into()))
            }
        };
        let ps = qp / self.max_pos;
        let ns = (1.0 - qn) / self.max_neg_complement;
        match self.variant {
            KliepVariant::Pos => Ok(qp),
            KliepVariant::Neg => Ok(1.0 - qn),
            KliepVariant::Norm => ratio(qp, qn),
            KliepVariant::PosScaled => Ok(ps),
            KliepVariant::NegScaled => Ok(ns),
            KliepVariant::NormScaled => ratio(qp / self.max_pos, qn / self.max_neg),
            KliepVariant::CnormScaled => ratio(qp / self.max_pos, qn / self.max_neg).map(|v| 1.0 - v),
            KliepVariant::AvgScaled => Ok((ps + ns) / 2.0),
        }
    }
}

/// Combines positive- and negative-numerator ratios into one posterior
/// estimate. `train` supplies the maxima used by the scaled variants.
pub fn kliep_eta(
    pos: DensityRatio,
    neg: DensityRatio,
    pi_hat: f64,
    variant: KliepVariant,
    train: &Features,
) -> Result<EtaEstimator> {
    if !(0.0..=1.0).contains(&pi_hat) {
        return Err(invalid(format!("class prior {pi_hat} outside [0,1]")));
    }
    if pos.numerator != Label::Pos || neg.numerator != Label::Neg {
        return Err(invalid("ratios must have positive and negative numerators"));
    }
    if pos.dim() != neg.dim() || pos.dim() != train.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: pos.dim(),
            found: train.n_cols(),
        });
    }
    let mut m = KliepEta {
        pos,
        neg,
        pi: pi_hat,
        variant,
        max_pos: f64::NEG_INFINITY,
        max_neg: f64::NEG_INFINITY,
        max_neg_complement: f64::NEG_INFINITY,
    };
    for x in train.rows() {
        let (qp, qn) = m.parts(x);
        m.max_pos = m.max_pos.max(qp);
        m.max_neg = m.max_neg.max(qn);
        m.max_neg_complement = m.max_neg_complement.max(1.0 - qn);
    }
    let scaled = !matches!(variant, KliepVariant::Pos | KliepVariant::Neg | KliepVariant::Norm);
    if scaled && !(m.max_pos > 0.0 && m.max_neg > 0.0 && m.max_neg_complement > 0.0) {
        return Err(Error::DegenerateEstimate("nonpositive training maximum for scaling".into()));
    }
    EtaEstimator::new(EtaMethod::Kliep(variant), Fitted::Kliep(m), train)
}
