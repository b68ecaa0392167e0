//! Trust-region policy optimization.

pub mod cg;
pub mod optimizer;
pub mod rollout;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cg::{conjugate_gradient, CgSolution};
pub use optimizer::{
    fit_value_function, line_search, natural_step, surrogate_grad, surrogate_loss, IterationStats, LineSearchResult,
    Trainer, ValueFitReport,
};
pub use rollout::{collect_rollouts, compute_advantages, gae, normalize, EpisodeSummary, RolloutBatch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrpoConfig {
    pub max_kl: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub backtrack_ratio: f64,
    pub max_backtracks: usize,
    pub discount: f64,
    pub gae_lambda: f64,
    pub episodes_per_iter: usize,
    pub value_epochs: usize,
    pub value_lr: f64,
    pub value_minibatch: usize,
    pub init_log_std: f64,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        TrpoConfig {
            max_kl: 0.01,
            cg_iters: 10,
            cg_damping: 0.1,
            backtrack_ratio: 0.8,
            max_backtracks: 15,
            discount: 0.99,
            gae_lambda: 0.97,
            episodes_per_iter: 50,
            value_epochs: 10,
            value_lr: 1e-3,
            value_minibatch: 256,
            init_log_std: -0.5,
        }
    }
}

impl TrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.max_kl > 0.0) {
            return bad("max_kl must be > 0");
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if self.episodes_per_iter == 0 {
            return bad("episodes_per_iter must be >= 1");
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return bad("backtrack_ratio must be in (0, 1)");
        }
        if !(self.cg_damping >= 0.0) {
            return bad("cg_damping must be >= 0");
        }
        if !(self.value_lr > 0.0) || self.value_minibatch == 0 {
            return bad("value_lr must be > 0 and value_minibatch >= 1");
        }
        if !self.init_log_std.is_finite() {
            return bad("init_log_std must be finite");
        }
        Ok(())
    }
}
