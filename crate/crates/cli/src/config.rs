//! Experiment configuration: JSON schema, validation, problem construction,
//! and the canonical config hash recorded in every report.
//!
//! The schema rejects unknown fields so typos surface as usage errors rather
//! than silently ignored knobs.  Every experiment reads the subset of fields
//! it needs and supplies documented defaults for the rest; fields that an
//! experiment does not consume are simply unused (but still hashed, so two
//! configs that differ anywhere hash differently).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hurst_sense_core::{CoreError, GridSpec, SdeProblem};

use crate::CliError;

/// Uniform grid parameters: observation window, truncation span, resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Observation horizon `T`.
    pub t_max: f64,
    /// Number of observation steps on `[0, T]`.
    pub n_steps: usize,
    /// Truncation span `S` of the past block `[-S, 0)`.
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    /// Number of past cells (0 disables the past block).
    #[serde(default)]
    pub n_past: usize,
}

fn default_truncation() -> f64 {
    8.0
}

impl GridConfig {
    /// Builds the grid, mapping `n_past = 0` to a pure observation grid.
    pub fn build(&self) -> Result<GridSpec<f64>, CoreError> {
        if self.n_past == 0 {
            GridSpec::without_past(self.t_max, self.n_steps)
        } else {
            GridSpec::new(self.t_max, self.truncation, self.n_steps, self.n_past)
        }
    }
}

/// Named test problem plus numeric parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// One of `linear`, `ou`, `sine`, `bounded-multiplicative`.
    pub name: String,
    /// Numeric parameters; unknown keys are rejected.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ProblemConfig {
    fn take(&self, allowed: &[(&str, f64)]) -> Result<Vec<f64>, CliError> {
        for key in self.params.keys() {
            if !allowed.iter().any(|(name, _)| name == key) {
                return Err(CliError::Usage(format!(
                    "problem '{}' does not take a parameter '{key}' (allowed: {})",
                    self.name,
                    allowed
                        .iter()
                        .map(|(n, _)| *n)
                        .collect::<Vec<_>>()
                        .join(", ")
                )));
            }
        }
        Ok(allowed
            .iter()
            .map(|&(name, default)| self.params.get(name).copied().unwrap_or(default))
            .collect())
    }

    /// Builds the problem.
    pub fn build(&self) -> Result<SdeProblem<f64>, CliError> {
        match self.name.as_str() {
            "linear" => {
                let p = self.take(&[("alpha", -0.5), ("beta", 0.3), ("x0", 1.0)])?;
                Ok(SdeProblem::linear(p[0], p[1], p[2]))
            }
            "ou" => {
                let p = self.take(&[("kappa", 1.0), ("x0", 0.0)])?;
                Ok(SdeProblem::ou(p[0], p[1]))
            }
            "sine" => {
                let p = self.take(&[("x0", 0.0)])?;
                Ok(SdeProblem::sine_drift(p[0]))
            }
            "bounded-multiplicative" => {
                let p = self.take(&[("x0", 0.5)])?;
                Ok(SdeProblem::bounded_multiplicative(p[0]))
            }
            other => Err(CliError::Usage(format!(
                "unknown problem '{other}' (known: linear, ou, sine, bounded-multiplicative)"
            ))),
        }
    }

    /// A named numeric parameter with a default.
    pub fn param(&self, name: &str, default: f64) -> f64 {
        self.params.get(name).copied().unwrap_or(default)
    }
}

/// One `(κ, H)` case of the stationary-variance experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FouCase {
    /// Mean-reversion rate.
    pub kappa: f64,
    /// Hurst parameter.
    pub h: f64,
}

/// The full experiment configuration (one JSON document).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional experiment name; must match the positional argument if set.
    #[serde(default)]
    pub experiment: Option<String>,
    /// Seed root; the `--seed` flag overrides it.
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo replications.
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    /// Grid every path lives on (refinement experiments derive rung grids
    /// from it, keeping `t_max`, `truncation`, and `n_past`).
    pub grid: GridConfig,
    /// Single Hurst value.
    #[serde(default)]
    pub h: Option<f64>,
    /// List of Hurst values.
    #[serde(default)]
    pub h_values: Option<Vec<f64>>,
    /// Hurst pairs for comparison experiments.
    #[serde(default)]
    pub h_pairs: Option<Vec<(f64, f64)>>,
    /// Test problem.
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    /// Hölder exponent of rough-path distances.
    #[serde(default)]
    pub rho: Option<f64>,
    /// Dyadic levels of rough-path experiments.
    #[serde(default)]
    pub levels: Option<Vec<usize>>,
    /// Second component of the mixed-area experiment
    /// (`sensitivity` or `independent`).
    #[serde(default)]
    pub partner: Option<String>,
    /// Finite-difference step sizes.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    /// Step-count ladder of refinement experiments.
    #[serde(default)]
    pub ladder: Option<Vec<usize>>,
    /// Laplace-transform rate of the hitting-time experiment.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Hitting barrier.
    #[serde(default)]
    pub barrier: Option<f64>,
    /// Weight exponent of the long-time pathwise statistic.
    #[serde(default)]
    pub eps: Option<f64>,
    /// Checkpoint times of the long-time comparison.
    #[serde(default)]
    pub checkpoints: Option<Vec<f64>>,
    /// Evaluation time of the law-Lipschitz statistic.
    #[serde(default)]
    pub t_eval: Option<f64>,
    /// Observable name (`identity`, `square`, `cos`, `tanh`).
    #[serde(default)]
    pub phi: Option<String>,
    /// Node indices of the covariance check.
    #[serde(default)]
    pub nodes: Option<Vec<usize>>,
    /// Path sampler of the covariance check (`mvn` or `cholesky`).
    #[serde(default)]
    pub sampler: Option<String>,
    /// Step-function pieces `(u, v, value)` of the Wiener-norm experiment.
    #[serde(default)]
    pub step_function: Option<Vec<(f64, f64, f64)>>,
    /// `(κ, H)` cases of the stationary-variance experiment.
    #[serde(default)]
    pub fou: Option<Vec<FouCase>>,
    /// Named tolerance overrides, recorded in the report metadata.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Output path; the `--out` flag overrides it.
    #[serde(default)]
    pub out: Option<String>,
}

fn default_n_mc() -> usize {
    1
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<Self, CliError> {
        if self.n_mc == 0 {
            return Err(CliError::Usage("n_mc must be at least 1".into()));
        }
        for (key, value) in &self.tolerances {
            if !(value.is_finite() && *value > 0.0) {
                return Err(CliError::Usage(format!(
                    "tolerance '{key}' must be a positive number, got {value}"
                )));
            }
        }
        Ok(self.clone())
    }

    /// Canonical hash of `(experiment, effective seed, config)`: the struct is
    /// re-serialized (fixed field order, defaults filled in), so formatting
    /// and key order of the input file do not matter.
    pub fn canonical_hash(&self, experiment: &str, seed: u64) -> String {
        let mut canonical = self.clone();
        canonical.seed = seed;
        canonical.experiment = Some(experiment.to_string());
        let body = serde_json::to_string(&canonical).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(body.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
