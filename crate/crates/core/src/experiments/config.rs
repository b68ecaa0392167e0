//! Experiment configuration file.
//!
//! A TOML document with top-level run settings and one table per component:
//!
//! ```toml
//! seed = 1
//! n_iterations = 300
//! eval_trials = 30
//! output_dir = "runs/nominal"
//!
//! [task]
//! horizon = 200
//!
//! [tool]
//! mass = 0.15
//! # ...
//!
//! [trpo]
//! max_kl = 0.01
//! ```
//!
//! Every table is optional and falls back to defaults, but a table that is
//! present must be complete for `tool`, `arm` and `gripper` (their fields are
//! validated together). Unknown keys anywhere are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actuation::ActuationConfig;
use crate::dynamics::{ArmParams, GripperParams, ToolParams};
use crate::env::{EnvConfig, TaskConfig};
use crate::error::{Error, Result};
use crate::trpo::TrpoConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Evaluate the mean policy every this many iterations (0 disables).
    pub every: usize,
    /// Stop training once a periodic evaluation reaches this success rate.
    pub stop_at_success: Option<f64>,
    /// Friction multiplier of the harsher environment used in the transfer study.
    pub real_proxy_friction: f64,
    pub sweep_multipliers: Vec<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            every: 10,
            stop_at_success: None,
            real_proxy_friction: 1.3,
            sweep_multipliers: vec![1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_iterations: usize,
    pub eval_trials: usize,
    pub output_dir: PathBuf,
    pub task: TaskConfig,
    pub tool: ToolParams,
    pub arm: ArmParams,
    pub gripper: GripperParams,
    pub actuation: ActuationConfig,
    pub trpo: TrpoConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            n_iterations: 300,
            eval_trials: 30,
            output_dir: PathBuf::from("runs"),
            task: TaskConfig::default(),
            tool: ToolParams::default(),
            arm: ArmParams::default(),
            gripper: GripperParams::default(),
            actuation: ActuationConfig::default(),
            trpo: TrpoConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<inline>"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate().map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.env().validate()?;
        self.trpo.validate()?;
        if self.eval_trials == 0 || self.n_iterations == 0 {
            return Err(Error::InvalidParams("eval_trials and n_iterations must be >= 1".into()));
        }
        let ev = &self.evaluation;
        if let Some(s) = ev.stop_at_success {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidParams(format!("stop_at_success must be in [0, 1], got {s}")));
            }
        }
        if !(ev.real_proxy_friction.is_finite() && ev.real_proxy_friction > 0.0) {
            return Err(Error::InvalidParams("real_proxy_friction must be > 0".into()));
        }
        if ev.sweep_multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidParams("sweep multipliers must be > 0".into()));
        }
        Ok(())
    }

    /// Environment as configured (training environment).
    pub fn env(&self) -> EnvConfig {
        EnvConfig::new(self.task, self.tool, self.arm, self.gripper, self.actuation)
    }

    /// Modeled actuation with the real-proxy friction multiplier.
    pub fn real_proxy_env(&self) -> EnvConfig {
        let actuation = ActuationConfig {
            idealized: false,
            ..self.actuation
        };
        self.env()
            .with_actuation(actuation)
            .with_friction_multiplier(self.evaluation.real_proxy_friction)
    }

    /// Hex SHA-256 of the canonical serialization, so formatting and comments
    /// in the source file do not change it. The seed and output directory are
    /// excluded; they are reported separately.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    /// First 16 hex digits of [`hash`](Self::hash).
    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["sed = 3", "[task]\nhorizn = 5", "[trpo]\nmax_kl = 0.01\nfoo = 1", "[bogus]\na = 1"] {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert!(matches!(err, Error::Config { .. }), "{text}: {err}");
        }
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml("[task]\ncontrol_period = 0.0505").is_err());
        assert!(ExperimentConfig::from_toml(
            "[tool]\nmass = 0.1\ninertia = 1e-3\ncom_distance = 0.1\nstatic_coeff = 0.01\ncoulomb_coeff = 0.02\nviscous_coeff = 0.0"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml("[evaluation]\nstop_at_success = 1.5").is_err());
    }

    #[test]
    fn partial_sections_use_defaults() {
        let c = ExperimentConfig::from_toml("seed = 9\n[trpo]\nmax_kl = 0.02\n[task]\nhorizon = 10").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.trpo.max_kl, 0.02);
        assert_eq!(c.trpo.cg_iters, TrpoConfig::default().cg_iters);
        assert_eq!(c.task.horizon, 10);
    }

    #[test]
    fn hash_ignores_formatting_and_seed() {
        let a = ExperimentConfig::from_toml("seed = 1\n[trpo]\nmax_kl = 0.02").unwrap();
        let b = ExperimentConfig::from_toml("# comment\nseed = 2\n\n[trpo]\nmax_kl   = 0.020\n").unwrap();
        let c = ExperimentConfig::from_toml("[trpo]\nmax_kl = 0.03").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn real_proxy_is_modeled() {
        let mut c = ExperimentConfig::default();
        c.actuation = ActuationConfig::idealized();
        let p = c.real_proxy_env();
        assert!(!p.actuation.idealized);
        assert_eq!(p.friction_multiplier, 1.3);
    }
}
