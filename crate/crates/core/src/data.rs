//! Dataset container, cost and noise parameters, label noise, splits and folds.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, tag, Rng};

/// Binary label encoded as -1 / +1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    /// Sign of a score with sign(0) = -1.
    pub fn from_score(score: f64) -> Label {
        if score > 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn from_int(v: i64) -> Option<Label> {
        match v {
            1 => Some(Label::Pos),
            -1 => Some(Label::Neg),
            _ => None,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i64(self.as_int())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Label::from_int(v).ok_or_else(|| serde::de::Error::custom(format!("label {v} is not -1 or 1")))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_int())
    }
}

/// Dense row-major feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite feature at row {}, column {}",
                bad / cols.max(1),
                bad % cols.max(1)
            )));
        }
        Ok(Features { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Features::new(rows.len(), cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select(&self, idx: &[usize]) -> Features {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Features {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Labeled sample with optional ground-truth posterior per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Features,
    labels: Vec<Label>,
    true_eta: Option<Vec<f64>>,
    name: String,
}

impl Dataset {
    pub fn new(
        features: Features,
        labels: Vec<Label>,
        true_eta: Option<Vec<f64>>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if features.n_rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.n_rows(),
                found: labels.len(),
            });
        }
        if let Some(eta) = &true_eta {
            if eta.len() != labels.len() {
                return Err(Error::DimensionMismatch {
                    expected: labels.len(),
                    found: eta.len(),
                });
            }
            if let Some(i) = eta.iter().position(|e| !(0.0..=1.0).contains(e)) {
                return Err(invalid(format!("true eta at row {i} outside [0,1]")));
            }
        }
        Ok(Dataset {
            features,
            labels,
            true_eta,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn true_eta(&self) -> Option<&[f64]> {
        self.true_eta.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same rows with replaced labels.
    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Dataset> {
        Dataset::new(
            self.features.clone(),
            labels,
            self.true_eta.clone(),
            self.name.clone(),
        )
    }

    pub fn with_features(&self, features: Features) -> Result<Dataset> {
        Dataset::new(
            features,
            self.labels.clone(),
            self.true_eta.clone(),
            self.name.clone(),
        )
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            true_eta: self
                .true_eta
                .as_ref()
                .map(|e| idx.iter().map(|&i| e[i]).collect()),
            name: self.name.clone(),
        }
    }

    /// (positives, negatives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|l| l.is_pos()).count();
        (pos, self.labels.len() - pos)
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.class_counts().0 as f64 / self.len() as f64
    }

    pub fn require_both_classes(&self) -> Result<()> {
        match self.class_counts() {
            (0, _) => Err(Error::MissingClass(Label::Pos)),
            (_, 0) => Err(Error::MissingClass(Label::Neg)),
            _ => Ok(()),
        }
    }
}

/// Symmetric label-noise rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    rho: f64,
}

impl NoiseSpec {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&rho) {
            return Err(invalid(format!("noise rate {rho} outside [0, 0.5)")));
        }
        Ok(NoiseSpec { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Misclassification cost weight, negative-branch margin and ridge strength.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostParams {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl CostParams {
    pub fn new(alpha: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha {alpha} outside (0,1)")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("gamma {gamma} must be positive")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda {lambda} must be positive")));
        }
        Ok(CostParams {
            alpha,
            gamma,
            lambda,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitPlan {
    pub train_fraction: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            train_fraction: 0.8,
            n_trials: 10,
            seed: 0,
            stratified: false,
        }
    }
}

impl SplitPlan {
    pub fn new(train_fraction: f64, n_trials: usize, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(invalid(format!(
                "train fraction {train_fraction} outside (0,1)"
            )));
        }
        if n_trials == 0 {
            return Err(invalid("n_trials must be at least 1"));
        }
        Ok(SplitPlan {
            train_fraction,
            n_trials,
            seed,
            stratified: false,
        })
    }

    pub fn stratified(mut self, on: bool) -> Self {
        self.stratified = on;
        self
    }
}

/// Posterior after symmetric flipping at rate `rho`.
pub fn corrupt_eta(eta: f64, rho: f64) -> f64 {
    (1.0 - 2.0 * rho) * eta + rho
}

/// Flips each label independently with probability `rho`.
pub fn inject_sln(data: &Dataset, noise: NoiseSpec, seed: u64) -> Dataset {
    let mut rng = rng::stream(seed, &[tag::NOISE]);
    let labels = data
        .labels()
        .iter()
        .map(|&l| {
            // draw unconditionally so the stream position is independent of rho
            let u: f64 = rng.random();
            if u < noise.rho() {
                l.flip()
            } else {
                l
            }
        })
        .collect();
    Dataset {
        labels,
        ..data.clone()
    }
}

/// Train/test partition for one trial.
pub fn split(data: &Dataset, plan: &SplitPlan, trial: usize) -> Result<(Dataset, Dataset)> {
    if trial >= plan.n_trials {
        return Err(invalid(format!(
            "trial {trial} out of range for {} trials",
            plan.n_trials
        )));
    }
    let m = data.len();
    let n_train = (plan.train_fraction * m as f64).round() as usize;
    if n_train == 0 || n_train >= m {
        return Err(Error::DegenerateSplit {
            train: n_train,
            test: m.saturating_sub(n_train),
        });
    }
    let mut rng = rng::stream(plan.seed, &[tag::SPLIT, trial as u64]);
    let (mut train, mut test) = if plan.stratified {
        let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
            (0..m).partition(|&i| data.labels()[i].is_pos());
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let take_pos = ((plan.train_fraction * pos.len() as f64).round() as usize)
            .min(n_train)
            .max(n_train.saturating_sub(neg.len()));
        let take_neg = n_train - take_pos;
        let mut train: Vec<usize> = pos[..take_pos].to_vec();
        train.extend_from_slice(&neg[..take_neg]);
        let mut test: Vec<usize> = pos[take_pos..].to_vec();
        test.extend_from_slice(&neg[take_neg..]);
        (train, test)
    } else {
        let mut idx: Vec<usize> = (0..m).collect();
        idx.shuffle(&mut rng);
        let test = idx.split_off(n_train);
        (idx, test)
    };
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

/// Held-out index sets for k-fold cross validation.
pub fn kfold(labels: &[Label], k: usize, stratified: bool, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(invalid(format!("cannot make {k} folds from {n} rows")));
    }
    let mut folds = vec![Vec::new(); k];
    if stratified {
        let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| labels[i].is_pos());
        pos.shuffle(rng);
        neg.shuffle(rng);
        for (j, &i) in pos.iter().chain(neg.iter()).enumerate() {
            folds[j % k].push(i);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        for (j, &i) in idx.iter().enumerate() {
            folds[j % k].push(i);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// (fit, held-out) index pairs built from [`kfold`].
pub fn cv_pairs(labels: &[Label], k: usize, stratified: bool, rng: &mut Rng) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let folds = kfold(labels, k, stratified, rng)?;
    let n = labels.len();
    Ok(folds
        .iter()
        .map(|held| {
            let mut mask = vec![false; n];
            for &i in held {
                mask[i] = true;
            }
            let fit: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
            (fit, held.clone())
        })
        .collect())
}

/// Per-column z-scoring fitted on one feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Features) -> Standardizer {
        let (m, n) = (x.n_rows(), x.n_cols());
        let mut mean = vec![0.0; n];
        for r in x.rows() {
            for (a, v) in mean.iter_mut().zip(r) {
                *a += v;
            }
        }
        for a in &mut mean {
            *a /= m.max(1) as f64;
        }
        let mut var = vec![0.0; n];
        for r in x.rows() {
            for j in 0..n {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let denom = m.saturating_sub(1).max(1) as f64;
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / denom).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: &Features) -> Features {
        let n = x.n_cols();
        let mut data = x.as_slice().to_vec();
        for (k, v) in data.iter_mut().enumerate() {
            let j = k % n;
            *v = (*v - self.mean[j]) / self.scale[j];
        }
        Features {
            rows: x.n_rows(),
            cols: n,
            data,
        }
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        Dataset {
            features: self.transform(&data.features),
            ..data.clone()
        }
    }

    /// Rewrites a linear model on standardized inputs as one on raw inputs.
    pub fn unscale_linear(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let raw_w: Vec<f64> = w.iter().zip(&self.scale).map(|(wi, s)| wi / s).collect();
        let shift: f64 = raw_w.iter().zip(&self.mean).map(|(wi, m)| wi * m).sum();
        (raw_w, b - shift)
    }
}
