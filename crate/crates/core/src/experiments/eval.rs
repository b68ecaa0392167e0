//! Deterministic mean-action evaluation.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::output::{write_rows, Provenance};

use crate::env::{Action, EnvConfig, PivotEnv};
use crate::error::Result;
use crate::nn::GaussianPolicy;
use crate::rng::{derive_seed, rng_from, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub success: bool,
    /// |φt − φtgt| after each control step.
    pub abs_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub trials: Vec<TrialResult>,
}

impl EvalReport {
    pub fn successes(&self) -> usize {
        self.trials.iter().filter(|t| t.success).count()
    }

    pub fn success_rate(&self) -> f64 {
        self.successes() as f64 / self.trials.len().max(1) as f64
    }

    pub fn mean_final_error(&self) -> f64 {
        self.trials
            .iter()
            .map(|t| t.abs_errors.last().copied().unwrap_or(0.0))
            .sum::<f64>()
            / self.trials.len().max(1) as f64
    }
}

/// Runs one trial with the policy mean as the action.
pub fn run_trial(env: &mut PivotEnv, policy: &GaussianPolicy, seed: u64) -> Result<TrialResult> {
    let mut rng = rng_from(seed, &[stream::ENV]);
    let mut obs = env.reset(&mut rng)?;
    let mut abs_errors = Vec::with_capacity(env.config().task.horizon);
    loop {
        let a = policy.mean(obs.as_slice())?;
        let t = env.step(Action::from_slice(&a)?)?;
        abs_errors.push(t.observation.0[0].abs());
        obs = t.observation;
        if t.done {
            return Ok(TrialResult {
                success: t.info.success,
                abs_errors,
            });
        }
    }
}

/// Evaluates `policy` on `n_trials` episodes. Trial `i` uses
/// `derive_seed(seed, [EVAL, i])`; trials run in parallel and are reported in
/// order.
pub fn evaluate_policy(policy: &GaussianPolicy, env: &EnvConfig, n_trials: usize, seed: u64) -> Result<EvalReport> {
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let mut e = PivotEnv::new(*env)?;
            run_trial(&mut e, policy, derive_seed(seed, &[stream::EVAL, i as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport { trials })
}

#[derive(Serialize)]
struct TraceRow<'a> {
    trial: usize,
    step: usize,
    abs_error: f64,
    config_hash: &'a str,
    seed: u64,
}

/// Per-trial `|φt − φtgt|` after every control step.
pub fn write_traces(path: &Path, report: &EvalReport, prov: &Provenance) -> Result<()> {
    let rows = report.trials.iter().enumerate().flat_map(|(trial, t)| {
        t.abs_errors.iter().enumerate().map(move |(step, &abs_error)| TraceRow {
            trial,
            step: step + 1,
            abs_error,
            config_hash: &prov.config_hash,
            seed: prov.seed,
        })
    });
    write_rows(path, rows)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    trials: usize,
    successes: usize,
    success_rate: f64,
    mean_final_error: f64,
    friction_multiplier: f64,
    idealized: bool,
    config_hash: &'a str,
    seed: u64,
}

pub fn write_summary(path: &Path, report: &EvalReport, env: &EnvConfig, prov: &Provenance) -> Result<()> {
    write_rows(
        path,
        [SummaryRow {
            trials: report.trials.len(),
            successes: report.successes(),
            success_rate: report.success_rate(),
            mean_final_error: report.mean_final_error(),
            friction_multiplier: env.friction_multiplier,
            idealized: env.actuation.idealized,
            config_hash: &prov.config_hash,
            seed: prov.seed,
        }],
    )
}
