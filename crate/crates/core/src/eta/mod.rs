//! Estimators of the posterior P(Y=1 | x) behind one fit/predict interface.

pub mod kernel;
pub mod kliep;
pub mod knn;
pub mod lkfun;
pub mod lspc;
pub mod quality;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Features, Label};
use crate::error::{invalid, Error, Result};
use crate::rng::tag;

pub use kernel::{centile_sigmas, KernelBasis, DEFAULT_CENTILES};
pub use kliep::{fit_kliep, kliep_eta, DensityRatio};
pub use knn::{fit_knn, select_knn_k};
pub use lkfun::{fit_lkfun, fit_lkfun_cv, inverse_link};
pub use lspc::fit_lspc;
pub use quality::{brier, eval_eta, quality_from_values, EtaQualityReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    Logistic,
    Squared,
    ModSquared,
    Exponential,
}

/// Ways of turning two fitted density ratios into a posterior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KliepVariant {
    Pos,
    Neg,
    Norm,
    PosScaled,
    NegScaled,
    NormScaled,
    CnormScaled,
    AvgScaled,
}

impl KliepVariant {
    pub const ALL: [KliepVariant; 8] = [
        KliepVariant::Pos,
        KliepVariant::Neg,
        KliepVariant::Norm,
        KliepVariant::PosScaled,
        KliepVariant::NegScaled,
        KliepVariant::NormScaled,
        KliepVariant::CnormScaled,
        KliepVariant::AvgScaled,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KliepVariant::Pos => "pos",
            KliepVariant::Neg => "neg",
            KliepVariant::Norm => "norm",
            KliepVariant::PosScaled => "pos_s",
            KliepVariant::NegScaled => "neg_s",
            KliepVariant::NormScaled => "norm_s",
            KliepVariant::CnormScaled => "cnorm_s",
            KliepVariant::AvgScaled => "avg_s",
        }
    }
}

/// Estimator selector, written `lkfun:logistic`, `lspc`, `kliep:norm`, `knn` or `knn:15`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EtaMethod {
    LkFun(LossKind),
    Lspc,
    Kliep(KliepVariant),
    /// Fixed k, or chosen by cross validation when absent.
    Knn(Option<usize>),
}

impl fmt::Display for EtaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaMethod::LkFun(l) => {
                let s = match l {
                    LossKind::Logistic => "logistic",
                    LossKind::Squared => "squared",
                    LossKind::ModSquared => "msq",
                    LossKind::Exponential => "exp",
                };
                write!(f, "lkfun:{s}")
            }
            EtaMethod::Lspc => f.write_str("lspc"),
            EtaMethod::Kliep(v) => write!(f, "kliep:{}", v.name()),
            EtaMethod::Knn(None) => f.write_str("knn"),
            EtaMethod::Knn(Some(k)) => write!(f, "knn:{k}"),
        }
    }
}

impl FromStr for EtaMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s.as_str(), None),
        };
        match (head, tail) {
            ("lkfun", Some(t)) => {
                let loss = match t {
                    "logistic" | "log" => LossKind::Logistic,
                    "squared" | "sq" => LossKind::Squared,
                    "msq" | "mod_squared" => LossKind::ModSquared,
                    "exp" | "exponential" => LossKind::Exponential,
                    _ => return Err(invalid(format!("unknown link loss '{t}'"))),
                };
                Ok(EtaMethod::LkFun(loss))
            }
            ("lspc", None) => Ok(EtaMethod::Lspc),
            ("kliep", Some(t)) => KliepVariant::ALL
                .iter()
                .find(|v| v.name() == t)
                .map(|&v| EtaMethod::Kliep(v))
                .ok_or_else(|| invalid(format!("unknown kliep variant '{t}'"))),
            ("kliep", None) => Ok(EtaMethod::Kliep(KliepVariant::Norm)),
            ("knn", None) => Ok(EtaMethod::Knn(None)),
            ("knn", Some(t)) => t
                .parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .map(|k| EtaMethod::Knn(Some(k)))
                .ok_or_else(|| invalid(format!("bad neighbour count '{t}'"))),
            _ => Err(invalid(format!("unknown estimator '{s}'"))),
        }
    }
}

impl TryFrom<String> for EtaMethod {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EtaMethod> for String {
    fn from(m: EtaMethod) -> String {
        m.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaPrediction {
    pub value: f64,
    /// The raw estimate fell outside [0,1].
    pub clamped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrainSummary {
    pub max_eta_on_train: f64,
    pub min_eta_on_train: f64,
}

/// Hyperparameters an estimator ended up with; unused ones stay `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EtaHyper {
    pub lambda: Option<f64>,
    /// Kernel width; for density ratios, the positive-numerator width.
    pub sigma: Option<f64>,
    pub sigma_neg: Option<f64>,
    pub k: Option<usize>,
}

#[derive(Clone, Debug)]
pub(crate) enum Fitted {
    Link(lkfun::LinkModel),
    Lspc(lspc::LspcModel),
    Kliep(kliep::KliepEta),
    Knn(knn::KnnModel),
}

impl Fitted {
    fn hyper(&self) -> EtaHyper {
        match self {
            Fitted::Link(m) => EtaHyper {
                lambda: Some(m.lambda),
                ..EtaHyper::default()
            },
            Fitted::Lspc(m) => EtaHyper {
                lambda: Some(m.lambda),
                sigma: Some(m.basis.sigma),
                ..EtaHyper::default()
            },
            Fitted::Kliep(m) => EtaHyper {
                sigma: Some(m.widths().0),
                sigma_neg: Some(m.widths().1),
                ..EtaHyper::default()
            },
            Fitted::Knn(m) => EtaHyper {
                k: Some(m.k()),
                ..EtaHyper::default()
            },
        }
    }

    fn dim(&self) -> usize {
        match self {
            Fitted::Link(m) => m.model.dim(),
            Fitted::Lspc(m) => m.dim(),
            Fitted::Kliep(m) => m.dim(),
            Fitted::Knn(m) => m.dim(),
        }
    }

    fn raw(&self, x: &[f64]) -> Result<f64> {
        match self {
            Fitted::Link(m) => Ok(m.raw(x)),
            Fitted::Lspc(m) => Ok(m.raw(x)),
            Fitted::Kliep(m) => m.raw(x),
            Fitted::Knn(m) => Ok(m.raw(x)),
        }
    }
}

/// Fitted posterior estimator; predictions are clamped to [0,1].
#[derive(Clone, Debug)]
pub struct EtaEstimator {
    method: EtaMethod,
    model: Fitted,
    train_summary: TrainSummary,
}

impl EtaEstimator {
    pub(crate) fn new(method: EtaMethod, model: Fitted, train: &Features) -> Result<Self> {
        let mut est = EtaEstimator {
            method,
            model,
            train_summary: TrainSummary {
                max_eta_on_train: f64::NAN,
                min_eta_on_train: f64::NAN,
            },
        };
        let vals = est.values(train)?;
        est.train_summary = TrainSummary {
            max_eta_on_train: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_eta_on_train: vals.iter().copied().fold(f64::INFINITY, f64::min),
        };
        Ok(est)
    }

    pub fn method(&self) -> EtaMethod {
        self.method
    }

    pub fn train_summary(&self) -> TrainSummary {
        self.train_summary
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn hyperparameters(&self) -> EtaHyper {
        self.model.hyper()
    }

    /// Positive- and negative-numerator ratios of a KLIEP estimator.
    pub fn density_ratios(&self) -> Option<(&DensityRatio, &DensityRatio)> {
        match &self.model {
            Fitted::Kliep(m) => Some(m.ratios()),
            _ => None,
        }
    }

    /// Estimate before clamping.
    pub fn raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        self.model.raw(x)
    }

    pub fn predict(&self, x: &[f64]) -> Result<EtaPrediction> {
        let r = self.raw(x)?;
        if r.is_nan() {
            return Err(Error::DegenerateEstimate(format!("{} produced NaN", self.method)));
        }
        let value = r.clamp(0.0, 1.0);
        Ok(EtaPrediction {
            value,
            clamped: value != r,
        })
    }

    pub fn predict_all(&self, x: &Features) -> Result<Vec<EtaPrediction>> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    pub fn values(&self, x: &Features) -> Result<Vec<f64>> {
        x.rows().map(|r| self.predict(r).map(|p| p.value)).collect()
    }
}

/// Estimator choice plus the grids its internal model selection searches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EtaConfig {
    pub method: EtaMethod,
    pub lkfun_lambdas: Vec<f64>,
    pub lspc_lambdas: Vec<f64>,
    pub centiles: Vec<f64>,
    pub max_centers: usize,
    pub cv_folds: usize,
    pub knn_ks: Vec<usize>,
    /// Skips model selection and uses these values.
    pub fixed: Option<EtaHyper>,
}

impl Default for EtaConfig {
    fn default() -> Self {
        EtaConfig {
            method: EtaMethod::Lspc,
            lkfun_lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            lspc_lambdas: vec![1e-3, 1e-2, 1e-1, 1.0],
            centiles: DEFAULT_CENTILES.to_vec(),
            max_centers: 100,
            cv_folds: 5,
            knn_ks: (0..26).map(|i| 2 * i + 1).collect(),
            fixed: None,
        }
    }
}

impl EtaConfig {
    pub fn new(method: EtaMethod) -> Self {
        EtaConfig {
            method,
            ..EtaConfig::default()
        }
    }

    /// Same estimator with the hyperparameters `est` selected.
    pub fn pinned(&self, est: &EtaEstimator) -> EtaConfig {
        EtaConfig {
            fixed: Some(est.hyperparameters()),
            ..self.clone()
        }
    }

    pub fn fit(&self, data: &Dataset, seed: u64) -> Result<EtaEstimator> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let seed = crate::rng::derive(seed, &[tag::ESTIMATOR]);
        if let Some(h) = self.fixed {
            return self.fit_fixed(data, &h, seed);
        }
        match self.method {
            EtaMethod::LkFun(loss) => fit_lkfun_cv(data, loss, &self.lkfun_lambdas, self.cv_folds, seed),
            EtaMethod::Lspc => {
                let sigmas = centile_sigmas(data.features(), &self.centiles, seed)?;
                fit_lspc(data, &self.lspc_lambdas, &sigmas, self.cv_folds, self.max_centers, seed)
            }
            EtaMethod::Kliep(variant) => {
                let sigmas = centile_sigmas(data.features(), &self.centiles, seed)?;
                let (pos, neg) = rayon::join(
                    || fit_kliep(data, Label::Pos, &sigmas, self.max_centers, self.cv_folds, seed),
                    || fit_kliep(data, Label::Neg, &sigmas, self.max_centers, self.cv_folds, seed),
                );
                let (pos, neg) = (pos?, neg?);
                kliep_eta(pos, neg, data.positive_fraction(), variant, data.features())
            }
            EtaMethod::Knn(Some(k)) => fit_knn(data, k),
            EtaMethod::Knn(None) => {
                let k = select_knn_k(data, &self.knn_ks, self.cv_folds, seed)?;
                fit_knn(data, k)
            }
        }
    }
}

impl EtaConfig {
    fn fit_fixed(&self, data: &Dataset, h: &EtaHyper, seed: u64) -> Result<EtaEstimator> {
        let need = |v: Option<f64>, what: &str| v.ok_or_else(|| invalid(format!("pinned {} needs {what}", self.method)));
        match self.method {
            EtaMethod::LkFun(loss) => fit_lkfun(data, loss, need(h.lambda, "lambda")?),
            EtaMethod::Lspc => fit_lspc(
                data,
                &[need(h.lambda, "lambda")?],
                &[need(h.sigma, "sigma")?],
                self.cv_folds,
                self.max_centers,
                seed,
            ),
            EtaMethod::Kliep(variant) => {
                let sp = need(h.sigma, "sigma")?;
                let sn = need(h.sigma_neg, "sigma_neg")?;
                let pos = fit_kliep(data, Label::Pos, &[sp], self.max_centers, self.cv_folds, seed)?;
                let neg = fit_kliep(data, Label::Neg, &[sn], self.max_centers, self.cv_folds, seed)?;
                kliep_eta(pos, neg, data.positive_fraction(), variant, data.features())
            }
            EtaMethod::Knn(_) => {
                let k = h.k.ok_or_else(|| invalid("pinned knn needs k"))?;
                fit_knn(data, k.min(data.len()))
            }
        }
    }
}
