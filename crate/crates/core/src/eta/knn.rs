//! Nearest-neighbour label averaging.

use std::cmp::Ordering;

use super::kernel::sq_dist;
use super::{EtaEstimator, EtaMethod, Fitted};
use crate::data::{cv_pairs, Dataset, Features};
use crate::error::{invalid, Result};
use crate::rng::{self, tag};

#[derive(Clone, Debug)]
pub(crate) struct KnnModel {
    x: Features,
    pos: Vec<bool>,
    k: usize,
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Indices of training rows ordered by distance to `q`, ties by index.
fn ranked(x: &Features, rows: &[usize], q: &[f64], keep: usize) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = rows.iter().map(|&i| (sq_dist(x.row(i), q), i)).collect();
    if keep < d.len() {
        d.select_nth_unstable_by(keep, by_distance);
        d.truncate(keep);
    }
    d.sort_by(by_distance);
    d
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.x.n_cols()
    }

    pub fn raw(&self, q: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.x.n_rows()).collect();
        let near = ranked(&self.x, &all, q, self.k);
        near.iter().filter(|(_, i)| self.pos[*i]).count() as f64 / self.k as f64
    }
}

/// Fraction of positives among the k nearest training rows.
pub fn fit_knn(data: &Dataset, k: usize) -> Result<EtaEstimator> {
    if k == 0 || k > data.len() {
        return Err(invalid(format!("k = {k} must lie in 1..={}", data.len())));
    }
    let model = KnnModel {
        x: data.features().clone(),
        pos: data.labels().iter().map(|l| l.is_pos()).collect(),
        k,
    };
    EtaEstimator::new(EtaMethod::Knn(Some(k)), Fitted::Knn(model), data.features())
}

/// Chooses k from `ks` by held-out Brier score; ties go to the smaller k.
pub fn select_knn_k(data: &Dataset, ks: &[usize], folds: usize, seed: u64) -> Result<usize> {
    let mut ks: Vec<usize> = ks.iter().copied().filter(|&k| k >= 1).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(invalid("no candidate neighbour counts"));
    }
    let nf = folds.min(data.len());
    if nf < 2 {
        return Ok(ks[0].min(data.len()));
    }
    let mut r = rng::stream(seed, &[tag::FOLDS]);
    let pairs = cv_pairs(data.labels(), nf, true, &mut r)?;
    let max_k = ks[ks.len() - 1];
    let mut loss = vec![0.0; ks.len()];
    let x = data.features();
    for (fit, held) in &pairs {
        let keep = max_k.min(fit.len());
        for &h in held {
            let near = ranked(x, fit, x.row(h), keep);
            let target = if data.labels()[h].is_pos() { 1.0 } else { 0.0 };
            let mut count = 0usize;
            let mut ki = 0;
            for (j, (_, i)) in near.iter().enumerate() {
                if data.labels()[*i].is_pos() {
                    count += 1;
                }
                while ki < ks.len() && ks[ki] == j + 1 {
                    loss[ki] += (count as f64 / ks[ki] as f64 - target).powi(2);
                    ki += 1;
                }
            }
            // k beyond this fold's size cannot be scored
            for l in &mut loss[ki..] {
                *l = f64::INFINITY;
            }
        }
    }
    let mut best = 0;
    for i in 1..ks.len() {
        if loss[i] < loss[best] {
            best = i;
        }
    }
    if !loss[best].is_finite() {
        return Ok(ks[0].min(data.len()));
    }
    Ok(ks[best])
}
