//! Least-squares probabilistic classifier on a shared Gaussian basis.

use nalgebra::{DMatrix, DVector};

use super::kernel::{design_from_distances, distance_table, pick_centers, KernelBasis};
use super::{EtaEstimator, EtaMethod, Fitted};
use crate::data::{cv_pairs, Dataset, Features, Label};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::rng::{self, tag};

const RETRIES: usize = 5;

#[derive(Clone, Debug)]
pub(crate) struct LspcModel {
    pub basis: KernelBasis,
    pub coef_pos: Vec<f64>,
    pub coef_neg: Vec<f64>,
    pub lambda: f64,
    /// Used where both class scores vanish.
    pub fallback: f64,
}

impl LspcModel {
    pub fn dim(&self) -> usize {
        self.basis.centers.n_cols()
    }

    pub fn raw(&self, x: &[f64]) -> f64 {
        let phi = self.basis.eval(x);
        normalized(&phi, &self.coef_pos, &self.coef_neg, self.fallback)
    }
}

fn normalized(phi: &[f64], pos: &[f64], neg: &[f64], fallback: f64) -> f64 {
    let sp: f64 = phi.iter().zip(pos).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    let sn: f64 = phi.iter().zip(neg).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    if sp + sn > 0.0 {
        sp / (sp + sn)
    } else {
        fallback
    }
}

/// Solves (H + lambda I) a = h for both classes, raising lambda on failure.
fn solve_pair(h: &DMatrix<f64>, hp: &DVector<f64>, hn: &DVector<f64>, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let b = h.nrows();
    let mut lam = lambda;
    for _ in 0..=RETRIES {
        let mut a = h.clone();
        for i in 0..b {
            a[(i, i)] += lam;
        }
        if let Some(ch) = a.cholesky() {
            return Ok((ch.solve(hp).as_slice().to_vec(), ch.solve(hn).as_slice().to_vec()));
        }
        lam *= 10.0;
    }
    let mut a = h.clone();
    for i in 0..b {
        a[(i, i)] += lambda;
    }
    Err(Error::IllConditioned {
        condition: linalg::symmetric_condition(&a),
    })
}

/// Gram matrix and per-class mean basis vectors of a design (rows = points).
fn moments(design: &DMatrix<f64>, labels: &[Label]) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let m = design.nrows() as f64;
    let h = design.transpose() * design / m;
    let b = design.ncols();
    let mut hp = DVector::zeros(b);
    let mut hn = DVector::zeros(b);
    for (i, y) in labels.iter().enumerate() {
        let target = if y.is_pos() { &mut hp } else { &mut hn };
        for l in 0..b {
            target[l] += design[(i, l)] / m;
        }
    }
    (h, hp, hn)
}

fn design(dist: &[f64], rows: usize, sigma: f64) -> DMatrix<f64> {
    let vals = design_from_distances(dist, sigma);
    DMatrix::from_row_slice(rows, vals.len() / rows.max(1), &vals)
}

/// Fits with (sigma, lambda) picked by held-out Brier score over `cv_folds` folds.
pub fn fit_lspc(
    data: &Dataset,
    lambdas: &[f64],
    sigmas: &[f64],
    cv_folds: usize,
    max_centers: usize,
    seed: u64,
) -> Result<EtaEstimator> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if lambdas.is_empty() || sigmas.is_empty() {
        return Err(invalid("lspc needs nonempty lambda and width grids"));
    }
    if lambdas.iter().any(|l| !(*l > 0.0)) || sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(invalid("lspc lambdas and widths must be positive"));
    }
    let sigmas: Vec<f64> = sigmas.iter().copied().filter(|s| s.is_finite()).collect();
    let (sigma, lambda) = if sigmas.len() * lambdas.len() == 1 {
        (sigmas[0], lambdas[0])
    } else {
        select(data, lambdas, &sigmas, cv_folds, max_centers, seed)?
    };
    let model = fit_fixed(data, sigma, lambda, max_centers, seed)?;
    EtaEstimator::new(EtaMethod::Lspc, Fitted::Lspc(model), data.features())
}

fn select(
    data: &Dataset,
    lambdas: &[f64],
    sigmas: &[f64],
    cv_folds: usize,
    max_centers: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let k = cv_folds.min(data.len());
    let mut r = rng::stream(seed, &[tag::FOLDS]);
    let pairs = cv_pairs(data.labels(), k, true, &mut r)?;
    let mut loss = vec![0.0; sigmas.len() * lambdas.len()];
    for (f, (fit, held)) in pairs.iter().enumerate() {
        let fx = data.features().select(fit);
        let fy: Vec<Label> = fit.iter().map(|&i| data.labels()[i]).collect();
        let cidx = pick_centers(fit.len(), max_centers, seed, &[f as u64]);
        let centers = fx.select(&cidx);
        let hx = data.features().select(held);
        let dfit = distance_table(&fx, &centers);
        let dheld = distance_table(&hx, &centers);
        let fallback = fraction_pos(&fy);
        for (si, &sigma) in sigmas.iter().enumerate() {
            let (h, hp, hn) = moments(&design(&dfit, fit.len(), sigma), &fy);
            let dh = design(&dheld, held.len(), sigma);
            for (li, &lambda) in lambdas.iter().enumerate() {
                let cell = &mut loss[si * lambdas.len() + li];
                let Ok((cp, cn)) = solve_pair(&h, &hp, &hn, lambda) else {
                    *cell = f64::INFINITY;
                    continue;
                };
                for (j, &i) in held.iter().enumerate() {
                    let phi: Vec<f64> = dh.row(j).iter().copied().collect();
                    let p = normalized(&phi, &cp, &cn, fallback);
                    let t = if data.labels()[i].is_pos() { 1.0 } else { 0.0 };
                    *cell += (p - t).powi(2) / data.len() as f64;
                }
            }
        }
    }
    let mut best = 0;
    for c in 1..loss.len() {
        if loss[c] < loss[best] {
            best = c;
        }
    }
    Ok((sigmas[best / lambdas.len()], lambdas[best % lambdas.len()]))
}

fn fraction_pos(y: &[Label]) -> f64 {
    if y.is_empty() {
        return 0.5;
    }
    y.iter().filter(|l| l.is_pos()).count() as f64 / y.len() as f64
}

pub(crate) fn fit_fixed(data: &Dataset, sigma: f64, lambda: f64, max_centers: usize, seed: u64) -> Result<LspcModel> {
    let cidx = pick_centers(data.len(), max_centers, seed, &[u64::MAX]);
    let centers: Features = data.features().select(&cidx);
    let dist = distance_table(data.features(), &centers);
    let (h, hp, hn) = moments(&design(&dist, data.len(), sigma), data.labels());
    let (coef_pos, coef_neg) = solve_pair(&h, &hp, &hn, lambda)?;
    Ok(LspcModel {
        basis: KernelBasis::new(centers, sigma)?,
        coef_pos,
        coef_neg,
        lambda,
        fallback: data.positive_fraction(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[(f64, i64)]) -> Dataset {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![p.0]).collect();
        let labels = points.iter().map(|p| Label::from_int(p.1).unwrap()).collect();
        Dataset::new(Features::from_rows(&rows).unwrap(), labels, None, "line").unwrap()
    }

    #[test]
    fn all_positive_gives_one() {
        let d = line(&[(0.0, 1), (1.0, 1), (2.5, 1), (4.0, 1)]);
        let est = fit_lspc(&d, &[0.1], &[1.0], 2, 100, 0).unwrap();
        for q in [-3.0, 0.5, 2.0, 40.0] {
            assert_eq!(est.predict(&[q]).unwrap().value, 1.0);
        }
    }

    #[test]
    fn mirrored_data_is_even_at_origin() {
        let mut pts = Vec::new();
        for i in 0..30 {
            let x = 0.1 + i as f64 * 0.13;
            let y = if i % 5 == 0 { -1 } else { 1 };
            pts.push((x, y));
            pts.push((-x, -y));
        }
        let d = line(&pts);
        let est = fit_lspc(&d, &[1e-3, 1e-2, 1e-1], &[0.5, 1.0, 2.0], 5, 100, 4).unwrap();
        assert!((est.predict(&[0.0]).unwrap().value - 0.5).abs() <= 0.05);
    }

    #[test]
    fn separated_classes() {
        let mut pts = Vec::new();
        for i in 0..20 {
            pts.push((-3.0 + i as f64 * 0.05, -1));
            pts.push((3.0 + i as f64 * 0.05, 1));
        }
        let d = line(&pts);
        let est = fit_lspc(&d, &[1e-3, 1e-2], &[0.5, 1.0], 4, 100, 1).unwrap();
        assert!(est.predict(&[3.4]).unwrap().value > 0.9);
        assert!(est.predict(&[-2.6]).unwrap().value < 0.1);
    }

    #[test]
    fn bad_grids_rejected() {
        let d = line(&[(0.0, 1), (1.0, -1)]);
        assert!(fit_lspc(&d, &[], &[1.0], 2, 10, 0).is_err());
        assert!(fit_lspc(&d, &[0.1], &[0.0], 2, 10, 0).is_err());
    }
}
