use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use noisycost::analysis::counterexample_checks;
use noisycost::csvio::{ingest_csv, records_to_csv, save_dataset, write_atomic};
use noisycost::data::Standardizer;
use noisycost::eta::{eval_eta, EtaConfig, EtaMethod};
use noisycost::harness::{run_experiment, ExperimentConfig};
use noisycost::metrics::{confusion, scores, PerfMeasure};
use noisycost::resample::{fit_resampler, predict_resampled_all, ResampleConfig};
use noisycost::synth::{gen_gaussian, GaussianMixtureSpec, Preset};
use noisycost::usq::fit_usq_closed_form;
use noisycost::{CostParams, Label};

#[derive(Parser)]
#[command(name = "noisycost", version, about = "Cost-sensitive classification under symmetric label noise")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a synthetic Gaussian dataset to CSV.
    GenData {
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        preset: Option<String>,
        /// JSON file with pi, mu_pos, mu_neg, sigma_pos, sigma_neg, m.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        m: Option<usize>,
        /// Override the positive-class prior.
        #[arg(long)]
        pi: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the closed-form weighted uneven-margin squared-loss classifier.
    TrainUsq {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        lambda: f64,
        /// Fit on z-scored features; the saved model is mapped back to raw features.
        #[arg(long)]
        standardize: bool,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Fit a posterior estimator and score it against the test `eta` column.
    EstimateEta {
        #[arg(long)]
        method: String,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report_out: PathBuf,
    },
    /// Under-sample, estimate the posterior and threshold at 0.5; gamma tuned by CV.
    ResamplePredict {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value = "acc")]
        pm: String,
        #[arg(long, default_value = "lspc")]
        eta_method: String,
        /// Comma-separated gammas; default alpha/(1-alpha) + 0.05 i, i = 1..12.
        #[arg(long, value_delimiter = ',')]
        gamma_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 5)]
        cv_folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report_out: PathBuf,
        /// Per-row predicted labels.
        #[arg(long)]
        predictions_out: Option<PathBuf>,
    },
    /// Acc, AM, F and WC from a CSV with `pred` and `truth` columns.
    Metrics {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the reference counter-example values and print a pass/fail table.
    VerifyCounterexamples,
    /// Run a configured noise sweep and write trials.csv, summary.json, summary.md.
    RunExperiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Serialize)]
struct ModelFile {
    w: Vec<f64>,
    b: f64,
    alpha: f64,
    gamma: f64,
    lambda: f64,
}

#[derive(Serialize)]
struct EtaRow {
    method: String,
    mse: f64,
    rmse: f64,
    mad: f64,
    md: f64,
    kl: Option<f64>,
    acc: f64,
    brier: f64,
    diff_max: Option<f64>,
    diff_min: Option<f64>,
    clamp_rate: f64,
    n_test: usize,
}

#[derive(Serialize)]
struct ResampleRow {
    acc: f64,
    am: f64,
    f: f64,
    wc: f64,
    f_defaulted: bool,
    am_partial: bool,
    gamma_star: f64,
    balanced_size: usize,
    flipped: bool,
    n_test: usize,
}

#[derive(Deserialize)]
struct PairRow {
    pred: f64,
    truth: f64,
}

#[derive(Serialize)]
struct PredRow {
    pred: i64,
}

fn label_of(v: f64, line: usize) -> Result<Label> {
    match v {
        1.0 => Ok(Label::Pos),
        -1.0 | 0.0 => Ok(Label::Neg),
        _ => bail!("line {line}: label {v} is not in {{-1,0,1}}"),
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> Result<noisycost::Dataset> {
    Ok(ingest_csv(path).with_context(|| format!("reading {}", path.display()))?.0)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::GenData {
            preset,
            spec,
            m,
            pi,
            seed,
            out,
        } => {
            let (mut s, name) = match (preset, spec) {
                (Some(p), _) => {
                    let p: Preset = p.parse()?;
                    (p.spec(), p.name().to_string())
                }
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let s: GaussianMixtureSpec = serde_json::from_str(&text)?;
                    (s, "custom".to_string())
                }
                (None, None) => bail!("give --preset or --spec"),
            };
            if let Some(m) = m {
                s = s.with_m(m);
            }
            if let Some(pi) = pi {
                s = s.with_pi(pi);
            }
            let data = gen_gaussian(&s, seed)?.with_name(name);
            save_dataset(&out, &data)?;
            let (p, n) = data.class_counts();
            eprintln!("wrote {} rows ({p} positive, {n} negative) to {}", data.len(), out.display());
        }
        Cmd::TrainUsq {
            train,
            alpha,
            gamma,
            lambda,
            standardize,
            model_out,
        } => {
            let data = load(&train)?;
            let cost = CostParams::new(alpha, gamma, lambda)?;
            let (w, b, cond) = if standardize {
                let s = Standardizer::fit(data.features());
                let fit = fit_usq_closed_form(&s.apply(&data), &cost)?;
                let (w, b) = s.unscale_linear(&fit.model.w, fit.model.b);
                (w, b, fit.system_condition)
            } else {
                let fit = fit_usq_closed_form(&data, &cost)?;
                (fit.model.w, fit.model.b, fit.system_condition)
            };
            let model = ModelFile {
                w,
                b,
                alpha,
                gamma,
                lambda,
            };
            write_out(&model_out, (serde_json::to_string_pretty(&model)? + "\n").as_bytes())?;
            eprintln!("system condition {cond:.3e}");
        }
        Cmd::EstimateEta {
            method,
            train,
            test,
            seed,
            report_out,
        } => {
            let method: EtaMethod = method.parse()?;
            let (tr, te) = (load(&train)?, load(&test)?);
            let est = EtaConfig::new(method).fit(&tr, seed)?;
            let r = eval_eta(&est, &tr, &te)?;
            let row = EtaRow {
                method: method.to_string(),
                mse: r.mse,
                rmse: r.rmse,
                mad: r.mad,
                md: r.md,
                kl: r.kl,
                acc: r.acc,
                brier: r.brier,
                diff_max: r.diff_max,
                diff_min: r.diff_min,
                clamp_rate: r.clamp_rate,
                n_test: r.n_test,
            };
            write_out(&report_out, &records_to_csv(&[row])?)?;
        }
        Cmd::ResamplePredict {
            train,
            test,
            alpha,
            pm,
            eta_method,
            gamma_grid,
            cv_folds,
            seed,
            report_out,
            predictions_out,
        } => {
            let pm: PerfMeasure = pm.parse()?;
            let method: EtaMethod = eta_method.parse()?;
            let (tr, te) = (load(&train)?, load(&test)?);
            let config = ResampleConfig {
                gamma_grid,
                cv_folds,
                seed,
                ..ResampleConfig::new(alpha, EtaConfig::new(method), pm)
            };
            let fit = fit_resampler(&tr, &config)?;
            let pred = predict_resampled_all(&fit, te.features())?;
            let s = scores(&confusion(&pred, te.labels())?, alpha, fit.gamma_star);
            let row = ResampleRow {
                acc: s.acc,
                am: s.am,
                f: s.f,
                wc: s.wc,
                f_defaulted: s.f_defaulted,
                am_partial: s.am_partial,
                gamma_star: fit.gamma_star,
                balanced_size: fit.balanced_size,
                flipped: fit.flipped,
                n_test: te.len(),
            };
            write_out(&report_out, &records_to_csv(&[row])?)?;
            if let Some(path) = predictions_out {
                let rows: Vec<PredRow> = pred.iter().map(|l| PredRow { pred: l.as_int() }).collect();
                write_out(&path, &records_to_csv(&rows)?)?;
            }
        }
        Cmd::Metrics {
            input,
            alpha,
            gamma,
            out,
        } => {
            if !(alpha > 0.0 && alpha < 1.0) || !(gamma > 0.0) {
                bail!("need alpha in (0,1) and gamma > 0");
            }
            let mut rdr = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_path(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let mut pred = Vec::new();
            let mut truth = Vec::new();
            for (i, row) in rdr.deserialize::<PairRow>().enumerate() {
                let row = row.with_context(|| format!("line {}", i + 2))?;
                pred.push(label_of(row.pred, i + 2)?);
                truth.push(label_of(row.truth, i + 2)?);
            }
            let s = scores(&confusion(&pred, &truth)?, alpha, gamma);
            let bytes = records_to_csv(&[s])?;
            match out {
                Some(p) => write_out(&p, &bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
        }
        Cmd::VerifyCounterexamples => {
            let rows = counterexample_checks()?;
            let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(10);
            println!("{:width$}  {:>10}  {:>12}  {:>8}  result", "check", "expected", "computed", "tol");
            for r in &rows {
                println!(
                    "{:width$}  {:>10.4}  {:>12.6}  {:>8.0e}  {}",
                    r.name,
                    r.expected,
                    r.computed,
                    r.tolerance,
                    if r.pass { "PASS" } else { "FAIL" }
                );
            }
            let failed = rows.iter().filter(|r| !r.pass).count();
            println!("{} of {} checks pass", rows.len() - failed, rows.len());
            return Ok(failed == 0);
        }
        Cmd::RunExperiment { config, out_dir } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text).context("parsing experiment config")?;
            let report = run_experiment(&cfg)?;
            report.write(&out_dir)?;
            print!("{}", report.summary_markdown());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
