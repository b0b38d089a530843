//! Experiment config files: one strict JSON document per experiment.

use std::path::PathBuf;

use serde::Deserialize;

use crate::analysis::{ErrorNorm, StabilityParams};
use crate::schemes::SchemeKind;

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Converge,
    Stability,
    Simulate,
    Threshold,
    Check,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Converge => "converge",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Threshold => "threshold",
            ExperimentKind::Check => "check",
        }
    }
}

/// Either an explicit list or a string `"2^-a..2^-b"` meaning 2^-a, …, 2^-b.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Stepsizes {
    List(Vec<f64>),
    Range(String),
}

impl Stepsizes {
    pub fn resolve(&self) -> Result<Vec<f64>, String> {
        match self {
            Stepsizes::List(v) => Ok(v.clone()),
            Stepsizes::Range(s) => parse_power_range(s),
        }
    }
}

fn parse_power_range(s: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("stepsize range `{s}` is not of the form \"2^-a..2^-b\"");
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let exponent = |part: &str| -> Result<i32, String> {
        part.trim()
            .strip_prefix("2^")
            .ok_or_else(bad)?
            .trim()
            .parse::<i32>()
            .map_err(|_| bad())
    };
    let (a, b) = (exponent(lo)?, exponent(hi)?);
    let (from, to) = (a.max(b), a.min(b));
    Ok((to..=from).rev().map(|k| 2f64.powi(k)).collect())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    pub model: String,
    #[serde(default)]
    pub schemes: Vec<SchemeKind>,
    #[serde(default)]
    pub stepsizes: Option<Stepsizes>,
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Overrides the model's default horizon.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub stability_params: Option<StabilityParams>,
    /// Fine grid of the proxy-exact solution (converge).
    #[serde(default)]
    pub reference_steps: Option<usize>,
    #[serde(default)]
    pub reference_scheme: Option<SchemeKind>,
    #[serde(default)]
    pub error_norm: ErrorNorm,
    /// Points for the commutativity and dissipativity checks.
    #[serde(default)]
    pub sample_points: Option<Vec<Vec<f64>>>,
    /// Decay rate γ for the dissipativity check.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Commutativity tolerance.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Also write a gnuplot script next to the data.
    #[serde(default)]
    pub plot: bool,
}

/// Parse a config document, reporting syntax and schema errors with their
/// line and column.
pub fn parse_config(source: &str, origin: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(source).map_err(|e| CliError::Config {
        message: format!("{origin}:{}:{}: {e}", e.line(), e.column()),
    })
}

/// 1-based line of the first occurrence of `"key"` in the source.
pub fn locate_key(source: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    source.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}
