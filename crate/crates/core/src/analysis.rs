//! Closed-form risk computations for the noise counter-examples and
//! the four-cost threshold comparison.

use serde::Serialize;

use crate::data::{corrupt_eta, Label};
use crate::error::{invalid, Error, Result};
use crate::synth::{GaussianMixture, GaussianMixtureSpec};

const ROBUST_TOL: f64 = 1e-9;

/// erfc(z) for z >= 0: positive-term series below 3, continued fraction above.
fn erfc_nonneg(z: f64) -> f64 {
    let lead = (-z * z).exp() / std::f64::consts::PI.sqrt();
    if z < 3.0 {
        // erf(z) = 2/sqrt(pi) e^{-z^2} sum_n (2z^2)^n z / (2n+1)!!
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        while term > 1e-17 * sum {
            n += 1.0;
            term *= 2.0 * z * z / (2.0 * n + 1.0);
            sum += term;
        }
        1.0 - 2.0 * lead * sum
    } else {
        // erfc(z) = e^{-z^2}/sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
        let mut t = z;
        for k in (1..=60).rev() {
            t = z + 0.5 * k as f64 / t;
        }
        lead / t
    }
}

/// Standard normal CDF, absolute error below 1e-15.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let z = x / std::f64::consts::SQRT_2;
    if z >= 0.0 {
        1.0 - 0.5 * erfc_nonneg(z)
    } else {
        0.5 * erfc_nonneg(-z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiskPair {
    pub clean_risk_of_clean_opt: f64,
    pub clean_risk_of_noisy_opt: f64,
    pub robust: bool,
}

impl RiskPair {
    fn new(clean: f64, noisy: f64) -> Self {
        RiskPair {
            clean_risk_of_clean_opt: clean,
            clean_risk_of_noisy_opt: noisy,
            robust: (clean - noisy).abs() <= ROBUST_TOL,
        }
    }
}

/// Cost of predicting `pred` when the truth is `truth`.
fn weighted_loss(pred: Label, truth: Label, alpha: f64) -> f64 {
    match (pred, truth) {
        (Label::Pos, Label::Neg) => alpha,
        (Label::Neg, Label::Pos) => 1.0 - alpha,
        _ => 0.0,
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} outside (0,1)")))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..0.5).contains(&rho) {
        Ok(())
    } else {
        Err(invalid(format!("rho = {rho} outside [0, 0.5)")))
    }
}

/// Constant posterior p: both optima are constant predictors.
pub fn example1_risks(p: f64, alpha: f64, rho: f64) -> Result<RiskPair> {
    check_unit("p", p)?;
    check_unit("alpha", alpha)?;
    check_rho(rho)?;
    let risk = |pred: Label| match pred {
        Label::Neg => (1.0 - alpha) * p,
        Label::Pos => alpha * (1.0 - p),
    };
    let clean = Label::from_score(p - alpha);
    let noisy = Label::from_score(corrupt_eta(p, rho) - alpha);
    Ok(RiskPair::new(risk(clean), risk(noisy)))
}

/// Intercepts b in (lower, upper] give the same predictions for sign(x + b).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterceptRegion {
    pub lower: f64,
    pub upper: f64,
    pub predictions: Vec<Label>,
    /// Expected clean weighted loss (uniform over the points).
    pub clean_risk: f64,
    /// Expected weighted loss under flipped labels.
    pub corrupted_risk: f64,
    /// Corrupted loss summed over the points rather than averaged.
    pub corrupted_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdCaseStudy {
    pub risks: RiskPair,
    pub regions: Vec<InterceptRegion>,
    pub clean_opt: usize,
    pub noisy_opt: usize,
}

pub const EXAMPLE2_POINTS: [(f64, Label); 3] = [(3.0, Label::Neg), (8.0, Label::Neg), (12.0, Label::Pos)];

/// Enumerates all intercept regions of sign(x + b) on a labeled 1-D point set.
pub fn threshold_case_study(points: &[(f64, Label)], alpha: f64, rho: f64) -> Result<ThresholdCaseStudy> {
    check_unit("alpha", alpha)?;
    check_rho(rho)?;
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    // sign(x + b) changes at b = -x; regions ordered from large b to small b.
    let mut cuts: Vec<f64> = points.iter().map(|p| -p.0).collect();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut bounds = vec![f64::INFINITY];
    bounds.extend(cuts.iter().copied());
    bounds.push(f64::NEG_INFINITY);
    let m = points.len() as f64;
    let mut regions = Vec::with_capacity(bounds.len() - 1);
    for w in bounds.windows(2) {
        let (upper, lower) = (w[0], w[1]);
        let probe = if upper.is_infinite() {
            lower + 1.0
        } else {
            upper
        };
        let preds: Vec<Label> = points.iter().map(|p| Label::from_score(p.0 + probe)).collect();
        let clean: f64 = preds
            .iter()
            .zip(points)
            .map(|(&f, p)| weighted_loss(f, p.1, alpha))
            .sum();
        let corrupted: f64 = preds
            .iter()
            .zip(points)
            .map(|(&f, p)| (1.0 - rho) * weighted_loss(f, p.1, alpha) + rho * weighted_loss(f, p.1.flip(), alpha))
            .sum();
        regions.push(InterceptRegion {
            lower,
            upper,
            predictions: preds,
            clean_risk: clean / m,
            corrupted_risk: corrupted / m,
            corrupted_total: corrupted,
        });
    }
    let argmin = |key: &dyn Fn(&InterceptRegion) -> f64| {
        let mut best = 0;
        for (i, r) in regions.iter().enumerate() {
            if key(r) < key(&regions[best]) {
                best = i;
            }
        }
        best
    };
    let clean_opt = argmin(&|r| r.clean_risk);
    let noisy_opt = argmin(&|r| r.corrupted_risk);
    Ok(ThresholdCaseStudy {
        risks: RiskPair::new(regions[clean_opt].clean_risk, regions[noisy_opt].clean_risk),
        regions,
        clean_opt,
        noisy_opt,
    })
}

/// Three-point set {(3,-1), (8,-1), (12,+1)} with classifiers sign(x + b).
pub fn example2_risks(alpha: f64, rho: f64) -> Result<ThresholdCaseStudy> {
    threshold_case_study(&EXAMPLE2_POINTS, alpha, rho)
}

/// Pointwise minimizer of the conditional uneven-margin squared risk.
pub fn usq_pointwise_optimum(eta: f64, alpha: f64, gamma: f64) -> Result<f64> {
    let den = eta * (1.0 - alpha) + gamma * alpha * (1.0 - eta);
    if !(den > 0.0) {
        return Err(invalid("pointwise optimum denominator is not positive"));
    }
    Ok((eta - alpha) / den)
}

/// Region {x : eta(x) > t} as a union of open intervals.
fn positive_set(mix: &GaussianMixture, t: f64) -> Vec<(f64, f64)> {
    let all = vec![(f64::NEG_INFINITY, f64::INFINITY)];
    if t < 0.0 {
        return all;
    }
    if t >= 1.0 {
        return Vec::new();
    }
    let level = (t / (1.0 - t)).ln();
    // log-odds is a quadratic q2 x^2 + q1 x + q0
    let q0 = mix.log_odds(&[0.0]).unwrap() - level;
    let lp = mix.log_odds(&[1.0]).unwrap() - level;
    let lm = mix.log_odds(&[-1.0]).unwrap() - level;
    let q2 = 0.5 * (lp + lm) - q0;
    let q1 = 0.5 * (lp - lm);
    let scale = q0.abs().max(q1.abs()).max(1.0);
    if q2.abs() <= 1e-14 * scale {
        if q1 > 0.0 {
            return vec![(-q0 / q1, f64::INFINITY)];
        } else if q1 < 0.0 {
            return vec![(f64::NEG_INFINITY, -q0 / q1)];
        }
        return if q0 > 0.0 { all } else { Vec::new() };
    }
    let disc = q1 * q1 - 4.0 * q2 * q0;
    if disc <= 0.0 {
        return if q2 > 0.0 { all } else { Vec::new() };
    }
    let s = disc.sqrt();
    let (r1, r2) = {
        let a = (-q1 - s) / (2.0 * q2);
        let b = (-q1 + s) / (2.0 * q2);
        (a.min(b), a.max(b))
    };
    if q2 > 0.0 {
        vec![(f64::NEG_INFINITY, r1), (r2, f64::INFINITY)]
    } else {
        vec![(r1, r2)]
    }
}

fn interval_mass(set: &[(f64, f64)], mean: f64, sd: f64) -> f64 {
    set.iter()
        .map(|&(lo, hi)| normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd))
        .sum()
}

fn boundary_points(set: &[(f64, f64)]) -> Vec<f64> {
    set.iter()
        .flat_map(|&(lo, hi)| [lo, hi])
        .filter(|v| v.is_finite())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianCaseStudy {
    pub risks: RiskPair,
    /// Posterior thresholds of the clean and the corrupted-data optimum.
    pub eta_threshold_clean: f64,
    pub eta_threshold_noisy: f64,
    /// Feature values where each optimum switches sign.
    pub boundary_clean: Vec<f64>,
    pub boundary_noisy: Vec<f64>,
}

/// Clean weighted risks of sign(eta - alpha) and sign(noisy eta - alpha) for a 1-D mixture.
pub fn gaussian_counterexample_risks(spec: &GaussianMixtureSpec, alpha: f64, rho: f64) -> Result<GaussianCaseStudy> {
    if spec.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: spec.dim(),
        });
    }
    check_unit("alpha", alpha)?;
    check_rho(rho)?;
    let mix = GaussianMixture::new(spec)?;
    let (mp, mn) = (spec.mu_pos[0], spec.mu_neg[0]);
    let (sp, sn) = (spec.sigma_pos[0][0].sqrt(), spec.sigma_neg[0][0].sqrt());
    let pi = spec.pi;
    let risk_of = |set: &[(f64, f64)]| {
        alpha * (1.0 - pi) * interval_mass(set, mn, sn) + (1.0 - alpha) * pi * (1.0 - interval_mass(set, mp, sp))
    };
    let t_clean = alpha;
    let t_noisy = (alpha - rho) / (1.0 - 2.0 * rho);
    let clean = positive_set(&mix, t_clean);
    let noisy = positive_set(&mix, t_noisy);
    Ok(GaussianCaseStudy {
        risks: RiskPair::new(risk_of(&clean), risk_of(&noisy)),
        eta_threshold_clean: t_clean,
        eta_threshold_noisy: t_noisy,
        boundary_clean: boundary_points(&clean),
        boundary_noisy: boundary_points(&noisy),
    })
}

/// Clean and corrupted-optimal posterior thresholds under the four-cost loss.
pub fn four_cost_thresholds(c_pos: f64, c_pos_hit: f64, c_neg: f64, c_neg_hit: f64, rho: f64) -> Result<(f64, f64)> {
    check_rho(rho)?;
    let d_pos = c_pos - c_pos_hit;
    let d_neg = c_neg - c_neg_hit;
    if !(d_pos > 0.0 && d_neg > 0.0) {
        return Err(invalid("misclassification costs must exceed the matching correct-decision costs"));
    }
    let s = d_pos + d_neg;
    if s == 0.0 {
        return Err(invalid("zero effective cost sum"));
    }
    Ok((d_neg / s, (d_neg - rho * s) / ((1.0 - 2.0 * rho) * s)))
}

/// True when the clean and corrupted thresholds coincide.
pub fn four_cost_thresholds_equal(c_pos: f64, c_pos_hit: f64, c_neg: f64, c_neg_hit: f64, rho: f64) -> Result<bool> {
    let (a, b) = four_cost_thresholds(c_pos, c_pos_hit, c_neg, c_neg_hit, rho)?;
    Ok((a - b).abs() <= 1e-12)
}

/// One reference value next to its recomputed counterpart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(name: &str, expected: f64, computed: f64, tolerance: f64) -> Self {
        CheckRow {
            name: name.to_string(),
            expected,
            computed,
            tolerance,
            pass: (expected - computed).abs() <= tolerance,
        }
    }
}

/// Truncates toward zero at two decimals, the way the reference values are quoted.
pub fn truncate_2dp(v: f64) -> f64 {
    (v * 100.0).trunc() / 100.0
}

/// Published counter-example values against their recomputation.
pub fn counterexample_checks() -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let e1 = example1_risks(0.2, 0.25, 0.3)?;
    rows.push(CheckRow::new("uniform pair: clean optimum risk", 0.15, e1.clean_risk_of_clean_opt, 1e-9));
    rows.push(CheckRow::new("uniform pair: noisy optimum risk", 0.20, e1.clean_risk_of_noisy_opt, 1e-9));
    let e2 = example2_risks(0.3, 0.42)?;
    rows.push(CheckRow::new("three points: clean optimum risk", 0.0, e2.risks.clean_risk_of_clean_opt, 1e-9));
    rows.push(CheckRow::new("three points: noisy optimum risk", 0.2, e2.risks.clean_risk_of_noisy_opt, 1e-9));
    rows.push(CheckRow::new("three points: corrupted total, b > -3", 0.474, e2.regions[0].corrupted_total, 1e-3));
    let last = e2.regions.last().expect("regions");
    rows.push(CheckRow::new("three points: corrupted total, b <= -12", 0.994, last.corrupted_total, 1e-3));
    let opt_clean = usq_pointwise_optimum(0.2, 0.25, 0.4)?;
    let opt_noisy = usq_pointwise_optimum(corrupt_eta(0.2, 0.3), 0.25, 0.4)?;
    rows.push(CheckRow::new("squared optimum, clean (2 dp, truncated)", -0.21, truncate_2dp(opt_clean), 1e-12));
    rows.push(CheckRow::new("squared optimum, noisy (2 dp, truncated)", 0.37, truncate_2dp(opt_noisy), 1e-12));
    let g = gaussian_counterexample_risks(&crate::synth::Preset::Gauss1d.spec(), 0.65, 0.3)?;
    rows.push(CheckRow::new("gaussian: clean boundary", 0.1956, g.boundary_clean.first().copied().unwrap_or(f64::NAN), 1e-3));
    rows.push(CheckRow::new("gaussian: noisy boundary", 0.4905, g.boundary_noisy.first().copied().unwrap_or(f64::NAN), 1e-3));
    rows.push(CheckRow::new("gaussian: clean optimum risk", 0.0103, g.risks.clean_risk_of_clean_opt, 1e-3));
    rows.push(CheckRow::new("gaussian: noisy optimum risk", 0.0185, g.risks.clean_risk_of_noisy_opt, 1e-3));
    Ok(rows)
}
