//! Experiment description loaded from JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::branching::BranchingSpec;
use crate::error::{Error, Result};
use crate::fmoment::MomentTestFunction;
use crate::levy_env::LevyEnvSpec;
use crate::simulate::TruncationPredicate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for CSV/JSON artifacts; the CLI `--out` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Number of individual paths written by `simulate` (all paths enter the summary).
    #[serde(default = "default_dump_paths")]
    pub dump_paths: usize,
}

fn default_dump_paths() -> usize {
    10
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            dump_paths: default_dump_paths(),
        }
    }
}

/// Pair of truncation levels for coupling experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingLevels {
    pub k1: f64,
    pub k2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_degree")]
    pub moment_degree: u32,
    #[serde(default = "default_se_multiple")]
    pub se_multiple: f64,
    /// Euler allowance C: comparisons accept |estimate − target| ≤ m·SE + C·step·|target|.
    #[serde(default = "default_euler_c")]
    pub euler_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingLevels>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_list: Vec<f64>,
    /// Final truncation gap must be below `epsilon · ‖E X(T)‖`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_degree() -> u32 {
    2
}
fn default_se_multiple() -> f64 {
    3.0
}
fn default_euler_c() -> f64 {
    2.0
}
fn default_epsilon() -> f64 {
    0.05
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            moment_degree: default_degree(),
            se_multiple: default_se_multiple(),
            euler_c: default_euler_c(),
            coupling: None,
            k_list: Vec::new(),
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub environment: LevyEnvSpec,
    pub branching: BranchingSpec,
    pub x0: [f64; 2],
    pub horizon: f64,
    pub step: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub truncation: TruncationPredicate,
    /// Observation times; empty means just the horizon.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub report_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_cap: Option<f64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<MomentTestFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<[f64; 2]>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Config {
        path: format!("line {}, column {}", e.line(), e.column()),
        msg: e.to_string(),
    }
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(json_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Report times, defaulting to the horizon.
    pub fn times(&self) -> Vec<f64> {
        if self.report_times.is_empty() {
            vec![self.horizon]
        } else {
            let mut ts = self.report_times.clone();
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            ts
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate("environment")?;
        self.branching.validate("branching")?;
        if !self.x0.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::spec("x0", "initial state must be finite and nonnegative"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::spec("horizon", "horizon must be positive and finite"));
        }
        if !(self.step.is_finite() && self.step > 0.0 && self.step <= self.horizon) {
            return Err(Error::spec("step", "step must be positive and not exceed the horizon"));
        }
        if self.n_paths == 0 {
            return Err(Error::spec("n_paths", "need at least one path"));
        }
        self.truncation.validate("truncation")?;
        for (i, t) in self.report_times.iter().enumerate() {
            if !(t.is_finite() && *t >= 0.0 && *t <= self.horizon) {
                return Err(Error::spec(format!("report_times[{i}]"), "must lie in [0, horizon]"));
            }
        }
        if let Some(cap) = self.rate_cap {
            if !(cap.is_finite() && cap > 0.0) {
                return Err(Error::spec("rate_cap", "must be positive and finite"));
            }
        }
        if let Some(f) = &self.function {
            f.validate("function")?;
        }
        if let Some(l) = self.lambda {
            if !l.iter().all(|v| v.is_finite() && *v >= 0.0) {
                return Err(Error::spec("lambda", "components must be finite and nonnegative"));
            }
        }
        let v = &self.verify;
        if v.moment_degree == 0 {
            return Err(Error::spec("verify.moment_degree", "must be at least 1"));
        }
        if !(v.se_multiple > 0.0) {
            return Err(Error::spec("verify.se_multiple", "must be positive"));
        }
        if !(v.euler_c >= 0.0 && v.euler_c.is_finite()) {
            return Err(Error::spec("verify.euler_c", "must be finite and nonnegative"));
        }
        if !(v.epsilon > 0.0) {
            return Err(Error::spec("verify.epsilon", "must be positive"));
        }
        if let Some(c) = v.coupling {
            if !(c.k1 > 0.0 && c.k1 <= c.k2) {
                return Err(Error::spec("verify.coupling", "need 0 < k1 ≤ k2"));
            }
        }
        if v.k_list.iter().any(|k| !(*k > 0.0)) || v.k_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::spec("verify.k_list", "levels must be positive and increasing"));
        }
        Ok(())
    }
}
