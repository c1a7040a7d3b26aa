//! Gaussian kernel bases and width candidates.

use rand::seq::SliceRandom;

use crate::data::Features;
use crate::error::{invalid, Error, Result};
use crate::rng::{self, tag};

pub const DEFAULT_CENTILES: [f64; 9] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0];

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gaussian kernel centers with a shared width.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBasis {
    pub centers: Features,
    pub sigma: f64,
}

impl KernelBasis {
    pub fn new(centers: Features, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("kernel width {sigma} must be positive")));
        }
        if centers.n_rows() == 0 {
            return Err(invalid("kernel basis needs at least one center"));
        }
        Ok(KernelBasis { centers, sigma })
    }

    pub fn len(&self) -> usize {
        self.centers.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.n_rows() == 0
    }

    /// exp(-|x - c_l|^2 / (2 sigma^2)) for every center.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let s = 1.0 / (2.0 * self.sigma * self.sigma);
        for (o, c) in out.iter_mut().zip(self.centers.rows()) {
            *o = (-sq_dist(x, c) * s).exp();
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }

    pub fn weighted_sum(&self, coef: &[f64], x: &[f64]) -> f64 {
        let s = 1.0 / (2.0 * self.sigma * self.sigma);
        coef.iter()
            .zip(self.centers.rows())
            .map(|(a, c)| a * (-sq_dist(x, c) * s).exp())
            .sum()
    }
}

/// Row-major squared distances between every row of `x` and every center.
pub fn distance_table(x: &Features, centers: &Features) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.n_rows() * centers.n_rows());
    for r in x.rows() {
        for c in centers.rows() {
            out.push(sq_dist(r, c));
        }
    }
    out
}

/// Applies the Gaussian kernel of width `sigma` to a distance table.
pub fn design_from_distances(dist: &[f64], sigma: f64) -> Vec<f64> {
    let s = 1.0 / (2.0 * sigma * sigma);
    dist.iter().map(|d| (-d * s).exp()).collect()
}

/// Kernel widths at the requested centiles of random pair distances.
pub fn centile_sigmas(x: &Features, centiles: &[f64], seed: u64) -> Result<Vec<f64>> {
    let m = x.n_rows();
    if m < 2 {
        return Err(invalid("need at least two points for kernel widths"));
    }
    if centiles.is_empty() || centiles.iter().any(|c| !(0.0..=100.0).contains(c)) {
        return Err(invalid("centiles must lie in [0, 100]"));
    }
    let np = m.min(2000);
    let mut rng = rng::stream(seed, &[tag::CENTILE]);
    let mut first: Vec<usize> = (0..m).collect();
    let mut second: Vec<usize> = (0..m).collect();
    first.shuffle(&mut rng);
    second.shuffle(&mut rng);
    // self-pairs and duplicate points would give zero widths
    let mut dist: Vec<f64> = (0..np)
        .map(|i| sq_dist(x.row(first[i]), x.row(second[i])))
        .filter(|d| *d > 0.0)
        .collect();
    if dist.is_empty() {
        return Err(Error::ZeroDistances);
    }
    dist.sort_by(f64::total_cmp);
    let np = dist.len();
    let mut cs = centiles.to_vec();
    cs.sort_by(f64::total_cmp);
    Ok(cs
        .iter()
        .map(|c| {
            // one-based position np * c / 100
            let pos = ((np as f64 * c / 100.0).round() as usize).clamp(1, np);
            dist[pos - 1].sqrt()
        })
        .collect())
}

/// Draws up to `b_max` distinct row indices.
pub fn pick_centers(n: usize, b_max: usize, seed: u64, path: &[u64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if n > b_max {
        let mut full = vec![tag::CENTERS];
        full.extend_from_slice(path);
        let mut rng = rng::stream(seed, &full);
        idx.shuffle(&mut rng);
        idx.truncate(b_max);
        idx.sort_unstable();
    }
    idx
}
