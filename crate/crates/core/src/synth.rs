//! Synthetic Gaussian-mixture and uniform-pair generators with exact posteriors.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Features, Label};
use crate::error::{invalid, Error, Result};
use crate::rng::{self, tag};

/// Two-class Gaussian mixture: P(Y=1) = pi, X|Y=+1 ~ N(mu_pos, sigma_pos), X|Y=-1 ~ N(mu_neg, sigma_neg).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub pi: f64,
    pub mu_pos: Vec<f64>,
    pub mu_neg: Vec<f64>,
    pub sigma_pos: Vec<Vec<f64>>,
    pub sigma_neg: Vec<Vec<f64>>,
    pub m: usize,
}

impl GaussianMixtureSpec {
    /// Shared covariance for both classes.
    pub fn shared(pi: f64, mu_pos: Vec<f64>, mu_neg: Vec<f64>, sigma: Vec<Vec<f64>>, m: usize) -> Self {
        GaussianMixtureSpec {
            pi,
            mu_pos,
            mu_neg,
            sigma_pos: sigma.clone(),
            sigma_neg: sigma,
            m,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu_pos.len()
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_pi(mut self, pi: f64) -> Self {
        self.pi = pi;
        self
    }
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::SingularSpec(format!("{what} is not {n}x{n}")));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                return Err(Error::SingularSpec(format!("{what} is not symmetric")));
            }
        }
    }
    Ok(m)
}

/// Per-class factors needed for sampling and posterior evaluation.
#[derive(Clone, Debug)]
struct ClassGaussian {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    inv: DMatrix<f64>,
    log_det: f64,
}

impl ClassGaussian {
    fn new(mean: &[f64], cov: &[Vec<f64>], what: &str) -> Result<Self> {
        let n = mean.len();
        let c = matrix(cov, n, what)?;
        let ch = c
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularSpec(format!("{what} has no Cholesky factor")))?;
        let l = ch.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(ClassGaussian {
            mean: DVector::from_column_slice(mean),
            inv: ch.inverse(),
            chol: l,
            log_det,
        })
    }

    fn mahalanobis(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.mean;
        d.dot(&(&self.inv * &d))
    }

    /// Log density including the normalizing constant.
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let n = self.mean.len() as f64;
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + self.log_det + self.mahalanobis(x))
    }
}

/// Validated mixture with the posterior's quadratic form precomputed.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    spec: GaussianMixtureSpec,
    pos: ClassGaussian,
    neg: ClassGaussian,
    quad: DMatrix<f64>,
    lin: DVector<f64>,
    offset: f64,
}

impl GaussianMixture {
    pub fn new(spec: &GaussianMixtureSpec) -> Result<Self> {
        if !(spec.pi > 0.0 && spec.pi < 1.0) {
            return Err(invalid(format!("class prior {} outside (0,1)", spec.pi)));
        }
        let n = spec.mu_pos.len();
        if n == 0 || spec.mu_neg.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: spec.mu_neg.len(),
            });
        }
        let pos = ClassGaussian::new(&spec.mu_pos, &spec.sigma_pos, "sigma_pos")?;
        let neg = ClassGaussian::new(&spec.mu_neg, &spec.sigma_neg, "sigma_neg")?;
        // log-odds(x) = log(pi/(1-pi)) - (logdet+ - logdet-)/2
        //   + (x'(S-^-1 - S+^-1)x - 2x'(S-^-1 mu- - S+^-1 mu+) + mu-'S-^-1 mu- - mu+'S+^-1 mu+)/2
        let quad = &neg.inv - &pos.inv;
        let ip = &pos.inv * &pos.mean;
        let ineg = &neg.inv * &neg.mean;
        let lin = &ineg - &ip;
        let offset = (spec.pi / (1.0 - spec.pi)).ln() - 0.5 * (pos.log_det - neg.log_det)
            + 0.5 * (neg.mean.dot(&ineg) - pos.mean.dot(&ip));
        Ok(GaussianMixture {
            spec: spec.clone(),
            pos,
            neg,
            quad,
            lin,
            offset,
        })
    }

    pub fn spec(&self) -> &GaussianMixtureSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn log_odds(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let v = DVector::from_column_slice(x);
        Ok(self.offset + 0.5 * v.dot(&(&self.quad * &v)) - v.dot(&self.lin))
    }

    /// P(Y=1 | X=x)
    pub fn eta(&self, x: &[f64]) -> Result<f64> {
        self.log_odds(x).map(logistic)
    }

    /// Bayes-rule posterior from the two class densities directly.
    pub fn eta_from_densities(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let v = DVector::from_column_slice(x);
        let lp = self.pos.log_density(&v) + self.spec.pi.ln();
        let ln = self.neg.log_density(&v) + (1.0 - self.spec.pi).ln();
        Ok(logistic(lp - ln))
    }

    pub fn class_density(&self, x: &[f64], label: Label) -> f64 {
        let v = DVector::from_column_slice(x);
        match label {
            Label::Pos => self.pos.log_density(&v).exp(),
            Label::Neg => self.neg.log_density(&v).exp(),
        }
    }

    /// Draws `m` rows; labels Bernoulli(pi), features from the class Gaussian.
    pub fn sample(&self, m: usize, seed: u64) -> Dataset {
        let n = self.dim();
        let mut rng = rng::stream(seed, &[tag::GENERATE]);
        let mut data = Vec::with_capacity(m * n);
        let mut labels = Vec::with_capacity(m);
        let mut eta = Vec::with_capacity(m);
        let mut z = DVector::<f64>::zeros(n);
        for _ in 0..m {
            let u: f64 = rng.random();
            let y = if u < self.spec.pi { Label::Pos } else { Label::Neg };
            for k in 0..n {
                z[k] = rng.sample(StandardNormal);
            }
            let g = if y.is_pos() { &self.pos } else { &self.neg };
            let x = &g.mean + &g.chol * &z;
            eta.push(logistic(
                self.offset + 0.5 * x.dot(&(&self.quad * &x)) - x.dot(&self.lin),
            ));
            data.extend(x.iter());
            labels.push(y);
        }
        let features = Features::new(m, n, data).expect("finite gaussian draws");
        Dataset::new(features, labels, Some(eta), "gaussian").expect("consistent sample")
    }
}

pub(crate) fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn eta_gaussian(x: &[f64], spec: &GaussianMixtureSpec) -> Result<f64> {
    GaussianMixture::new(spec)?.eta(x)
}

pub fn gen_gaussian(spec: &GaussianMixtureSpec, seed: u64) -> Result<Dataset> {
    Ok(GaussianMixture::new(spec)?.sample(spec.m, seed))
}

/// Positives uniform on (0, p), negatives uniform on (1-p, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformPairSpec {
    pub p: f64,
    pub m: usize,
}

/// Rows carry the constant posterior `p` as their ground truth.
pub fn gen_uniform_pair(spec: &UniformPairSpec, seed: u64) -> Result<Dataset> {
    let p = spec.p;
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p = {p} outside (0,1)")));
    }
    let mut rng = rng::stream(seed, &[tag::GENERATE]);
    let mut xs = Vec::with_capacity(spec.m);
    let mut labels = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        if u < p {
            labels.push(Label::Pos);
            xs.push(v * p);
        } else {
            labels.push(Label::Neg);
            xs.push(1.0 - p + v * p);
        }
    }
    Dataset::new(
        Features::new(spec.m, 1, xs)?,
        labels,
        Some(vec![p; spec.m]),
        "uniform_pair",
    )
}

/// +1 iff eta > threshold.
pub fn bayes_predict(eta: f64, threshold: f64) -> Label {
    if eta > threshold {
        Label::Pos
    } else {
        Label::Neg
    }
}

/// Named synthetic distributions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Syn2d,
    Syn3d,
    Syn10d,
    Syn3dImb,
    SynDataset1,
    SynDataset2,
    BupaProxy,
    Gauss1d,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Syn2d,
        Preset::Syn3d,
        Preset::Syn10d,
        Preset::Syn3dImb,
        Preset::SynDataset1,
        Preset::SynDataset2,
        Preset::BupaProxy,
        Preset::Gauss1d,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Syn2d => "syn2d",
            Preset::Syn3d => "syn3d",
            Preset::Syn10d => "syn10d",
            Preset::Syn3dImb => "syn3d_imb",
            Preset::SynDataset1 => "syn_dataset1",
            Preset::SynDataset2 => "syn_dataset2",
            Preset::BupaProxy => "bupa_proxy",
            Preset::Gauss1d => "gauss1d",
        }
    }

    pub fn spec(&self) -> GaussianMixtureSpec {
        match self {
            Preset::Syn2d => GaussianMixtureSpec::shared(
                0.5,
                vec![1.2, 0.0],
                vec![-1.2, 0.0],
                vec![vec![1.0, 0.4], vec![0.4, 1.0]],
                1000,
            ),
            Preset::Syn3d => GaussianMixtureSpec::shared(
                0.5,
                vec![1.3, 0.0, 0.0],
                vec![-1.3, 0.0, 0.0],
                equicorrelated(3, 1.0, 0.1),
                1000,
            ),
            Preset::Syn10d => GaussianMixtureSpec::shared(
                0.5,
                vec![2.0, 1.2, 2.0, 2.1, 2.0, 2.0, 2.0, 0.2, 2.0, 3.6],
                vec![2.0, -1.2, 2.0, -2.1, 2.0, 2.0, 2.0, -0.2, 2.0, -3.6],
                equicorrelated(10, 1.0, 0.1),
                1000,
            ),
            Preset::Syn3dImb => GaussianMixtureSpec::shared(
                0.35,
                vec![1.5, 0.0, -1.0],
                vec![-1.5, 1.0, 1.0],
                equicorrelated(3, 2.0, -0.3),
                4000,
            ),
            Preset::SynDataset1 => GaussianMixtureSpec::shared(
                0.5,
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![vec![1.0, -0.25], vec![-0.25, 1.0]],
                1000,
            ),
            Preset::SynDataset2 => GaussianMixtureSpec::shared(
                0.5,
                vec![0.9, -0.5],
                vec![-0.9, -0.8],
                vec![vec![1.0, 0.5], vec![0.5, 1.0]],
                1000,
            ),
            // Stand-in with the shape of the liver-disorders data: 6 features,
            // 345 rows, 42% positives, weak separation.
            Preset::BupaProxy => GaussianMixtureSpec::shared(
                0.42,
                vec![0.25, 0.2, 0.3, 0.25, 0.15, 0.1],
                vec![-0.25, -0.2, -0.3, -0.25, -0.15, -0.1],
                equicorrelated(6, 1.0, 0.2),
                345,
            ),
            Preset::Gauss1d => GaussianMixtureSpec::shared(0.8, vec![2.0], vec![-2.5], vec![vec![1.0]], 1000),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Preset::ALL
            .iter()
            .copied()
            .find(|p| p.name() == key)
            .ok_or_else(|| invalid(format!("unknown preset '{s}'")))
    }
}

fn equicorrelated(n: usize, diag: f64, off: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { diag } else { off }).collect())
        .collect()
}
