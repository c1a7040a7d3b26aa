//! Cost-sensitive binary classification under symmetric label noise.
//!
//! Two learners are provided: a ridge-regularized linear classifier fitted in
//! closed form with a weighted uneven-margin squared loss, and a predictor
//! that under-samples negatives and thresholds an estimate of the noisy
//! posterior at one half. Around them sit posterior estimators, synthetic
//! generators with exact posteriors, metrics, closed-form counter-example
//! checks and an experiment harness.

pub mod analysis;
pub mod csvio;
pub mod data;
pub mod error;
pub mod eta;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod resample;
pub mod rng;
pub mod synth;
pub mod usq;

pub use data::{CostParams, Dataset, Features, Label, NoiseSpec, SplitPlan};
pub use error::{Error, Result};
