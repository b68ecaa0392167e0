//! Friction-robustness sweep and the idealized-vs-modeled transfer study.

use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::eval::evaluate_policy;
use super::output::{write_rows, Provenance};
use super::train::{test_seed, train, IterationRecord};
use crate::actuation::ActuationConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::GaussianPolicy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub multiplier: f64,
    pub successes: usize,
    pub trials: usize,
}

impl SweepPoint {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials.max(1) as f64
    }
}

/// Evaluates a fixed policy with the static and Coulomb coefficients scaled by
/// each multiplier. Every multiplier sees the same trial seeds.
pub fn friction_sweep(
    policy: &GaussianPolicy,
    env: &EnvConfig,
    multipliers: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if multipliers.is_empty() {
        return Err(Error::InvalidParams("no sweep multipliers given".into()));
    }
    multipliers
        .iter()
        .map(|&m| {
            let e = env.with_friction_multiplier(m);
            e.validate()?;
            let report = evaluate_policy(policy, &e, trials, seed)?;
            Ok(SweepPoint {
                multiplier: m,
                successes: report.successes(),
                trials,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct SweepRow<'a> {
    multiplier: f64,
    successes: usize,
    trials: usize,
    success_rate: f64,
    config_hash: &'a str,
    seed: u64,
}

pub fn write_sweep(path: &Path, points: &[SweepPoint], prov: &Provenance) -> Result<()> {
    write_rows(
        path,
        points.iter().map(|p| SweepRow {
            multiplier: p.multiplier,
            successes: p.successes,
            trials: p.trials,
            success_rate: p.success_rate(),
            config_hash: &prov.config_hash,
            seed: prov.seed,
        }),
    )
}

/// Success rates of the policy trained with idealized actuation (A) and the one
/// trained with modeled actuation (B), each evaluated on the idealized
/// environment and on the real proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub a_on_idealized: f64,
    pub a_on_proxy: f64,
    pub b_on_idealized: f64,
    pub b_on_proxy: f64,
    /// B evaluated on its own training environment.
    pub b_on_training: f64,
}

impl TransferMatrix {
    /// Percentage points by which B beats A on the real proxy.
    pub fn proxy_gap_points(&self) -> f64 {
        100.0 * (self.b_on_proxy - self.a_on_proxy)
    }
}

/// Training configs for the two arms of the transfer study: (A) idealized
/// actuation, (B) the configured noise levels with modeled actuation.
pub fn transfer_configs(config: &ExperimentConfig) -> (ExperimentConfig, ExperimentConfig) {
    let a = ExperimentConfig {
        actuation: ActuationConfig::idealized(),
        ..config.clone()
    };
    let b = ExperimentConfig {
        actuation: ActuationConfig {
            idealized: false,
            ..config.actuation
        },
        ..config.clone()
    };
    (a, b)
}

/// Cross-evaluates two trained policies on held-out trials.
pub fn transfer_matrix(a: &GaussianPolicy, b: &GaussianPolicy, config: &ExperimentConfig, seed: u64) -> Result<TransferMatrix> {
    let (config_a, config_b) = transfer_configs(config);
    let idealized = config_a.env();
    let proxy = config_b.real_proxy_env();
    let eval = |p: &GaussianPolicy, env: &EnvConfig| -> Result<f64> {
        Ok(evaluate_policy(p, env, config.eval_trials, test_seed(seed))?.success_rate())
    };
    Ok(TransferMatrix {
        a_on_idealized: eval(a, &idealized)?,
        a_on_proxy: eval(a, &proxy)?,
        b_on_idealized: eval(b, &idealized)?,
        b_on_proxy: eval(b, &proxy)?,
        b_on_training: eval(b, &config_b.env())?,
    })
}

/// Trains both policies of the study and cross-evaluates the best validation
/// checkpoint of each.
pub fn transfer_study(
    config: &ExperimentConfig,
    seed: u64,
    mut on_iteration: impl FnMut(char, &IterationRecord),
) -> Result<TransferMatrix> {
    let (config_a, config_b) = transfer_configs(config);
    let a = train(&config_a, seed, |r| on_iteration('A', r))?.best_policy;
    let b = train(&config_b, seed, |r| on_iteration('B', r))?.best_policy;
    transfer_matrix(&a, &b, config, seed)
}

#[derive(Serialize)]
struct TransferRow<'a> {
    policy: &'static str,
    trained_on: &'static str,
    eval_idealized: f64,
    eval_real_proxy: f64,
    config_hash: &'a str,
    seed: u64,
}

pub fn write_transfer(path: &Path, m: &TransferMatrix, prov: &Provenance) -> Result<()> {
    let row = |policy, trained_on, eval_idealized, eval_real_proxy| TransferRow {
        policy,
        trained_on,
        eval_idealized,
        eval_real_proxy,
        config_hash: &prov.config_hash,
        seed: prov.seed,
    };
    write_rows(
        path,
        [
            row("A", "idealized", m.a_on_idealized, m.a_on_proxy),
            row("B", "modeled", m.b_on_idealized, m.b_on_proxy),
        ],
    )
}
