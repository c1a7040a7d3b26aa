//! Experiment driver: noise sweep over repeated train/test splits, inner CV
//! on the corrupted training side, evaluation on the clean test side.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csvio::{ingest_csv, records_to_csv, write_atomic};
use crate::data::{cv_pairs, inject_sln, split, CostParams, Dataset, Label, NoiseSpec, SplitPlan, Standardizer};
use crate::error::{invalid, Error, Result};
use crate::eta::{EtaConfig, EtaMethod};
use crate::metrics::{confusion, scores, Confusion, PerfMeasure, Scores};
use crate::resample::{default_gamma_grid, fit_resampler, predict_resampled_all, ResampleConfig};
use crate::rng::{self, tag};
use crate::synth::{bayes_predict, gen_gaussian, Preset};
use crate::usq::fit_usq_closed_form;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Preset {
        name: Preset,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pi: Option<f64>,
    },
    Csv {
        path: PathBuf,
    },
}

impl DataSource {
    /// Draws the preset sample or reads the file.
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DataSource::Preset { name, m, pi } => {
                let mut spec = name.spec();
                if let Some(m) = m {
                    spec = spec.with_m(*m);
                }
                if let Some(pi) = pi {
                    spec = spec.with_pi(*pi);
                }
                Ok(gen_gaussian(&spec, rng::derive(seed, &[tag::GENERATE]))?.with_name(name.name()))
            }
            DataSource::Csv { path } => Ok(ingest_csv(path)?.0),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaPolicy {
    Fixed {
        value: f64,
    },
    /// alpha/(1-alpha) + 0.05 i, i = 1..12.
    #[default]
    TunedDefault,
    TunedGrid {
        grid: Vec<f64>,
    },
}

/// Learner run in each cell. Written as `usq_erm`, `resample:<eta method>` or `bayes_oracle`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    UsqErm,
    Resample(EtaMethod),
    /// Thresholds the true posterior; needs an `eta` column.
    BayesOracle,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::UsqErm => write!(f, "usq_erm"),
            Scheme::Resample(m) => write!(f, "resample:{m}"),
            Scheme::BayesOracle => write!(f, "bayes_oracle"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "usq_erm" | "usq" => Ok(Scheme::UsqErm),
            "bayes_oracle" | "bayes" => Ok(Scheme::BayesOracle),
            _ => match s.strip_prefix("resample:") {
                Some(m) => Ok(Scheme::Resample(m.parse()?)),
                None if s == "resample" => Ok(Scheme::Resample(EtaMethod::Lspc)),
                None => Err(invalid(format!("unknown scheme '{s}'"))),
            },
        }
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.to_string()
    }
}

/// Clean-data strategies for handling imbalance with the squared-loss learner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TuningMode {
    /// alpha tuned, gamma = 1
    Ap1,
    /// gamma tuned, alpha = 0.5
    Ap2,
    /// both tuned
    Ap3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub alpha: f64,
    #[serde(default = "default_rhos")]
    pub rho_list: Vec<f64>,
    #[serde(default = "default_lambdas")]
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub gamma: GammaPolicy,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub tuning_mode: Option<TuningMode>,
    /// Candidate alphas for Ap1/Ap3.
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    /// Candidate gammas for Ap2/Ap3.
    #[serde(default = "default_tune_gammas")]
    pub tune_gamma_grid: Vec<f64>,
    #[serde(default = "default_pm")]
    pub pm: PerfMeasure,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    /// z-score features with train statistics. Defaults to on for CSV input, off for presets.
    #[serde(default)]
    pub standardize: Option<bool>,
    /// Estimator settings for resampling schemes; the method is taken from the scheme.
    #[serde(default)]
    pub eta: EtaConfig,
}

fn default_rhos() -> Vec<f64> {
    vec![0.0]
}
fn default_lambdas() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0]
}
fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::UsqErm]
}
fn default_alpha_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}
fn default_tune_gammas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0]
}
fn default_pm() -> PerfMeasure {
    PerfMeasure::Acc
}
fn default_trials() -> usize {
    10
}
fn default_fraction() -> f64 {
    0.8
}
fn default_folds() -> usize {
    5
}

impl ExperimentConfig {
    pub fn new(source: DataSource, alpha: f64) -> Self {
        ExperimentConfig {
            source,
            alpha,
            rho_list: default_rhos(),
            lambda_grid: default_lambdas(),
            gamma: GammaPolicy::default(),
            schemes: default_schemes(),
            tuning_mode: None,
            alpha_grid: default_alpha_grid(),
            tune_gamma_grid: default_tune_gammas(),
            pm: default_pm(),
            n_trials: default_trials(),
            seed: 0,
            train_fraction: default_fraction(),
            cv_folds: default_folds(),
            standardize: None,
            eta: EtaConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha {} outside (0,1)", self.alpha)));
        }
        if self.rho_list.is_empty() {
            return Err(invalid("rho_list is empty"));
        }
        for &r in &self.rho_list {
            NoiseSpec::new(r)?;
        }
        positive_grid("lambda_grid", &self.lambda_grid)?;
        match &self.gamma {
            GammaPolicy::Fixed { value } => positive_grid("gamma", &[*value])?,
            GammaPolicy::TunedGrid { grid } => positive_grid("gamma grid", grid)?,
            GammaPolicy::TunedDefault => {}
        }
        if self.schemes.is_empty() {
            return Err(invalid("no schemes"));
        }
        if let Some(mode) = self.tuning_mode {
            if self.rho_list.iter().any(|&r| r != 0.0) {
                return Err(invalid(format!("tuning mode {mode:?} is for clean data; rho_list must be [0]")));
            }
            if matches!(mode, TuningMode::Ap1 | TuningMode::Ap3) {
                if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
                    return Err(invalid("alpha_grid must be nonempty with entries in (0,1)"));
                }
            }
            if matches!(mode, TuningMode::Ap2 | TuningMode::Ap3) {
                positive_grid("tune_gamma_grid", &self.tune_gamma_grid)?;
            }
        }
        if self.n_trials == 0 {
            return Err(invalid("n_trials must be at least 1"));
        }
        if self.cv_folds < 2 {
            return Err(invalid("cv_folds must be at least 2"));
        }
        SplitPlan::new(self.train_fraction, self.n_trials, self.seed)?;
        Ok(())
    }

    fn standardize_on(&self) -> bool {
        self.standardize
            .unwrap_or(matches!(self.source, DataSource::Csv { .. }))
    }

    /// Gamma candidates for the squared-loss learner and the oracle.
    fn gamma_candidates(&self) -> Vec<f64> {
        match &self.gamma {
            GammaPolicy::Fixed { value } => vec![*value],
            GammaPolicy::TunedDefault => default_gamma_grid(self.alpha),
            GammaPolicy::TunedGrid { grid } => grid.clone(),
        }
    }

    /// (fitting alpha, gamma) pairs searched for the squared-loss learner.
    fn cost_candidates(&self) -> Vec<(f64, f64)> {
        let pairs = |alphas: &[f64], gammas: &[f64]| -> Vec<(f64, f64)> {
            alphas
                .iter()
                .flat_map(|&a| gammas.iter().map(move |&g| (a, g)))
                .collect()
        };
        match self.tuning_mode {
            None => pairs(&[self.alpha], &self.gamma_candidates()),
            Some(TuningMode::Ap1) => pairs(&self.alpha_grid, &[1.0]),
            Some(TuningMode::Ap2) => pairs(&[0.5], &self.tune_gamma_grid),
            Some(TuningMode::Ap3) => pairs(&self.alpha_grid, &self.tune_gamma_grid),
        }
    }
}

fn positive_grid(what: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid(format!("{what} is empty")));
    }
    if let Some(v) = grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(invalid(format!("{what} entry {v} must be positive")));
    }
    Ok(())
}

/// One (scheme, noise rate, trial) cell. Metrics are NaN when the cell failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scheme: String,
    pub rho: f64,
    pub trial: usize,
    pub acc: f64,
    pub am: f64,
    pub f: f64,
    pub wc: f64,
    pub f_defaulted: bool,
    pub am_partial: bool,
    /// Cost weight used for fitting (differs from the configured one only under a tuning mode).
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    /// Seed of the noise draw for this (trial, rho).
    pub seed: u64,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1); None below two values.
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> MeanSd {
        let n = values.len();
        if n == 0 {
            return MeanSd { mean: None, sd: None };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = (n > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        MeanSd { mean: Some(mean), sd }
    }

    fn cell(&self) -> String {
        match (self.mean, self.sd) {
            (Some(m), Some(s)) => format!("{m:.3}±{s:.3}"),
            (Some(m), None) => format!("{m:.3}"),
            _ => "-".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scheme: String,
    pub rho: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub acc: MeanSd,
    pub am: MeanSd,
    pub f: MeanSd,
    pub wc: MeanSd,
}

/// Groups trial rows by (scheme, rho) in first-appearance order; failed rows are counted, not averaged.
pub fn aggregate(trials: &[TrialRecord]) -> Vec<Aggregate> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for t in trials {
        if !keys.iter().any(|(s, r)| *s == t.scheme && *r == t.rho) {
            keys.push((t.scheme.clone(), t.rho));
        }
    }
    keys.into_iter()
        .map(|(scheme, rho)| {
            let rows: Vec<&TrialRecord> = trials.iter().filter(|t| t.scheme == scheme && t.rho == rho).collect();
            let ok: Vec<&&TrialRecord> = rows.iter().filter(|t| t.ok()).collect();
            let col = |f: fn(&TrialRecord) -> f64| MeanSd::of(&ok.iter().map(|t| f(t)).collect::<Vec<_>>());
            Aggregate {
                n_ok: ok.len(),
                n_failed: rows.len() - ok.len(),
                acc: col(|t| t.acc),
                am: col(|t| t.am),
                f: col(|t| t.f),
                wc: col(|t| t.wc),
                scheme,
                rho,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub config: ExperimentConfig,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

#[derive(Serialize)]
struct Summary<'a> {
    dataset: &'a str,
    config: &'a ExperimentConfig,
    aggregates: &'a [Aggregate],
}

impl ExperimentReport {
    pub fn trials_csv(&self) -> Result<Vec<u8>> {
        records_to_csv(&self.trials)
    }

    pub fn summary_json(&self) -> Result<String> {
        let s = Summary {
            dataset: &self.dataset,
            config: &self.config,
            aggregates: &self.aggregates,
        };
        Ok(serde_json::to_string_pretty(&s)? + "\n")
    }

    /// One table per measure: rows are noise rates, columns are schemes, cells mean±sd.
    pub fn summary_markdown(&self) -> String {
        let mut schemes: Vec<&str> = Vec::new();
        let mut rhos: Vec<f64> = Vec::new();
        for a in &self.aggregates {
            if !schemes.contains(&a.scheme.as_str()) {
                schemes.push(&a.scheme);
            }
            if !rhos.contains(&a.rho) {
                rhos.push(a.rho);
            }
        }
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} (alpha = {}, {} trials, selection by {})\n",
            self.dataset, self.config.alpha, self.config.n_trials, self.config.pm
        );
        let measures: [(&str, fn(&Aggregate) -> MeanSd); 4] =
            [("Acc", |a| a.acc), ("AM", |a| a.am), ("F", |a| a.f), ("WC", |a| a.wc)];
        for (title, pick) in measures {
            let _ = writeln!(out, "## {title}\n");
            let _ = writeln!(out, "| rho | {} |", schemes.join(" | "));
            let _ = writeln!(out, "|---|{}", "---|".repeat(schemes.len()));
            for &rho in &rhos {
                let cells: Vec<String> = schemes
                    .iter()
                    .map(|s| {
                        self.aggregates
                            .iter()
                            .find(|a| a.scheme == *s && a.rho == rho)
                            .map(|a| pick(a).cell())
                            .unwrap_or_else(|| "-".into())
                    })
                    .collect();
                let _ = writeln!(out, "| {rho} | {} |", cells.join(" | "));
            }
            out.push('\n');
        }
        let failed: usize = self.aggregates.iter().map(|a| a.n_failed).sum();
        if failed > 0 {
            let _ = writeln!(out, "{failed} cell(s) failed; see the error column of trials.csv.");
        }
        out
    }

    /// Writes trials.csv, summary.json and summary.md into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("trials.csv"), &self.trials_csv()?)?;
        write_atomic(&dir.join("summary.json"), self.summary_json()?.as_bytes())?;
        write_atomic(&dir.join("summary.md"), self.summary_markdown().as_bytes())
    }
}

struct Outcome {
    scores: Scores,
    alpha: Option<f64>,
    gamma: Option<f64>,
    lambda: Option<f64>,
}

/// Pooled held-out confusion of the squared-loss learner over fixed folds.
fn usq_cv_confusion(data: &Dataset, pairs: &[(Vec<usize>, Vec<usize>)], cost: &CostParams) -> Result<Confusion> {
    let mut total = Confusion::default();
    for (fit, held) in pairs {
        let model = fit_usq_closed_form(&data.subset(fit), cost)?.model;
        for &i in held {
            total.add(model.predict(data.row(i))?, data.labels()[i]);
        }
    }
    Ok(total)
}

fn run_usq(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset, fold_seed: u64) -> Result<Outcome> {
    let mut r = rng::stream(fold_seed, &[tag::FOLDS]);
    let pairs = cv_pairs(train.labels(), cfg.cv_folds.min(train.len()), true, &mut r)?;
    let mut best: Option<(f64, CostParams)> = None;
    for (a, g) in cfg.cost_candidates() {
        for &lam in &cfg.lambda_grid {
            let cost = CostParams::new(a, g, lam)?;
            let value = match usq_cv_confusion(train, &pairs, &cost) {
                Ok(c) => cfg.pm.value(&scores(&c, cfg.alpha, g)),
                Err(_) => cfg.pm.worst(),
            };
            if best.as_ref().is_none_or(|(v, _)| cfg.pm.better(value, *v)) {
                best = Some((value, cost));
            }
        }
    }
    let (_, cost) = best.ok_or_else(|| invalid("no candidate costs"))?;
    let model = fit_usq_closed_form(train, &cost)?.model;
    let c = confusion(&model.predict_all(test.features())?, test.labels())?;
    Ok(Outcome {
        scores: scores(&c, cfg.alpha, cost.gamma),
        alpha: Some(cost.alpha),
        gamma: Some(cost.gamma),
        lambda: Some(cost.lambda),
    })
}

fn run_resample(cfg: &ExperimentConfig, method: EtaMethod, train: &Dataset, test: &Dataset, seed: u64) -> Result<Outcome> {
    let mut eta = cfg.eta.clone();
    eta.method = method;
    let gamma_grid = match &cfg.gamma {
        GammaPolicy::Fixed { value } => Some(vec![*value]),
        GammaPolicy::TunedDefault => None,
        GammaPolicy::TunedGrid { grid } => Some(grid.clone()),
    };
    let rc = ResampleConfig {
        gamma_grid,
        cv_folds: cfg.cv_folds,
        seed,
        ..ResampleConfig::new(cfg.alpha, eta, cfg.pm)
    };
    let fit = fit_resampler(train, &rc)?;
    let pred = predict_resampled_all(&fit, test.features())?;
    let c = confusion(&pred, test.labels())?;
    Ok(Outcome {
        scores: scores(&c, cfg.alpha, fit.gamma_star),
        alpha: Some(cfg.alpha),
        gamma: Some(fit.gamma_star),
        lambda: None,
    })
}

/// Thresholds the true posterior at alpha/(gamma + (1-gamma) alpha); gamma picked on the clean training labels.
fn run_oracle(cfg: &ExperimentConfig, train_clean: &Dataset, test: &Dataset) -> Result<Outcome> {
    let (tr_eta, te_eta) = match (train_clean.true_eta(), test.true_eta()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::MissingTrueEta),
    };
    let a = cfg.alpha;
    let threshold = |g: f64| a / (g + (1.0 - g) * a);
    let mut best: Option<(f64, f64)> = None;
    for g in cfg.gamma_candidates() {
        let pred: Vec<Label> = tr_eta.iter().map(|&e| bayes_predict(e, threshold(g))).collect();
        let v = cfg.pm.value(&scores(&confusion(&pred, train_clean.labels())?, a, g));
        if best.is_none_or(|(bv, _)| cfg.pm.better(v, bv)) {
            best = Some((v, g));
        }
    }
    let (_, g) = best.ok_or_else(|| invalid("empty gamma grid"))?;
    let pred: Vec<Label> = te_eta.iter().map(|&e| bayes_predict(e, threshold(g))).collect();
    Ok(Outcome {
        scores: scores(&confusion(&pred, test.labels())?, a, g),
        alpha: Some(a),
        gamma: Some(g),
        lambda: None,
    })
}

fn record(scheme: &Scheme, rho: f64, trial: usize, seed: u64, out: Result<Outcome>) -> TrialRecord {
    let base = TrialRecord {
        scheme: scheme.to_string(),
        rho,
        trial,
        acc: f64::NAN,
        am: f64::NAN,
        f: f64::NAN,
        wc: f64::NAN,
        f_defaulted: false,
        am_partial: false,
        alpha: None,
        gamma: None,
        lambda: None,
        seed,
        error: None,
    };
    match out {
        Ok(o) => TrialRecord {
            acc: o.scores.acc,
            am: o.scores.am,
            f: o.scores.f,
            wc: o.scores.wc,
            f_defaulted: o.scores.f_defaulted,
            am_partial: o.scores.am_partial,
            alpha: o.alpha,
            gamma: o.gamma,
            lambda: o.lambda,
            ..base
        },
        Err(e) => TrialRecord {
            error: Some(e.to_string()),
            ..base
        },
    }
}

/// Runs every (trial, rho, scheme) cell of the sweep on the given data.
pub fn run_on_dataset(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    data.require_both_classes()?;
    let plan = SplitPlan::new(cfg.train_fraction, cfg.n_trials, cfg.seed)?;
    let splits: Vec<(Dataset, Dataset)> = (0..cfg.n_trials)
        .map(|t| {
            let (tr, te) = split(data, &plan, t)?;
            Ok(if cfg.standardize_on() {
                let s = Standardizer::fit(tr.features());
                (s.apply(&tr), s.apply(&te))
            } else {
                (tr, te)
            })
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..cfg.n_trials)
        .flat_map(|t| (0..cfg.rho_list.len()).map(move |r| (t, r)))
        .collect();
    let per_cell: Vec<Vec<TrialRecord>> = cells
        .par_iter()
        .map(|&(t, ri)| {
            let rho = cfg.rho_list[ri];
            let (train, test) = &splits[t];
            let noise_seed = rng::derive(cfg.seed, &[tag::NOISE, t as u64, ri as u64]);
            let noisy = match NoiseSpec::new(rho) {
                Ok(n) => inject_sln(train, n, noise_seed),
                Err(e) => return vec![record(&Scheme::UsqErm, rho, t, noise_seed, Err(e))],
            };
            let fold_seed = rng::derive(cfg.seed, &[tag::FOLDS, t as u64, ri as u64]);
            cfg.schemes
                .iter()
                .enumerate()
                .map(|(si, scheme)| {
                    let out = match scheme {
                        Scheme::UsqErm => run_usq(cfg, &noisy, test, fold_seed),
                        Scheme::Resample(m) => {
                            run_resample(cfg, *m, &noisy, test, rng::derive(cfg.seed, &[t as u64, ri as u64, si as u64]))
                        }
                        Scheme::BayesOracle => run_oracle(cfg, train, test),
                    };
                    record(scheme, rho, t, noise_seed, out)
                })
                .collect()
        })
        .collect();
    let mut trials: Vec<TrialRecord> = per_cell.into_iter().flatten().collect();
    // scheme-major, then rho, then trial
    trials.sort_by(|a, b| {
        let si = |r: &TrialRecord| cfg.schemes.iter().position(|s| s.to_string() == r.scheme);
        let ri = |r: &TrialRecord| cfg.rho_list.iter().position(|&x| x == r.rho);
        (si(a), ri(a), a.trial).cmp(&(si(b), ri(b), b.trial))
    });
    let aggregates = aggregate(&trials);
    Ok(ExperimentReport {
        dataset: data.name().to_string(),
        config: cfg.clone(),
        trials,
        aggregates,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = cfg.source.load(cfg.seed)?;
    run_on_dataset(cfg, &data)
}

/// Clean-data comparison of the Ap1/Ap2/Ap3 strategies for the squared-loss learner.
pub fn tune_modes(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.tuning_mode.is_none() {
        return Err(invalid("tune_modes needs a tuning_mode"));
    }
    if cfg.rho_list != [0.0] {
        return Err(invalid("tune_modes runs on clean data only; set rho_list to [0]"));
    }
    run_experiment(cfg)
}
