//! Training runs with periodic validation, early stopping and CSV output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::eval::evaluate_policy;
use super::output::{write_rows, Provenance};
use crate::env::PivotEnv;
use crate::error::{Error, Result};
use crate::nn::{checkpoint, GaussianPolicy};
use crate::rng::{derive_seed, stream};
use crate::trpo::{IterationStats, Trainer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub stats: IterationStats,
    /// Mean-action success on the validation trials, when evaluated.
    pub validation_success: Option<f64>,
    /// Seconds since the start of training.
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_policy: GaussianPolicy,
    /// Policy with the highest validation success (the final policy when
    /// validation is disabled). Ties go to the later iteration.
    pub best_policy: GaussianPolicy,
    pub best_iteration: usize,
    pub best_validation: Option<f64>,
    pub history: Vec<IterationRecord>,
    pub stopped_early: bool,
}

/// Seed of the validation trials used during training.
pub fn validation_seed(seed: u64) -> u64 {
    derive_seed(seed, &[stream::VALIDATION])
}

/// Seed of the held-out trials used to report a trained policy.
pub fn test_seed(seed: u64) -> u64 {
    derive_seed(seed, &[stream::TEST])
}

/// Trains for `config.n_iterations` iterations (fewer if early stopping
/// triggers), calling `on_iteration` after each one.
pub fn train(config: &ExperimentConfig, seed: u64, mut on_iteration: impl FnMut(&IterationRecord)) -> Result<TrainOutcome> {
    config.validate()?;
    let env = config.env();
    let mut trainer = Trainer::new(move || PivotEnv::new(env), config.trpo, seed)?;
    let every = config.evaluation.every;
    let start = Instant::now();
    let mut history = Vec::with_capacity(config.n_iterations);
    let mut best: Option<(f64, usize, GaussianPolicy)> = None;
    let mut stopped_early = false;
    for _ in 0..config.n_iterations {
        let stats = trainer.step()?;
        let done = stats.iteration + 1;
        let validation_success = if every > 0 && (done % every == 0 || done == config.n_iterations) {
            let report = evaluate_policy(&trainer.policy, &env, config.eval_trials, validation_seed(seed))?;
            Some(report.success_rate())
        } else {
            None
        };
        let record = IterationRecord {
            stats,
            validation_success,
            wall_time: start.elapsed().as_secs_f64(),
        };
        on_iteration(&record);
        history.push(record);
        if let Some(v) = validation_success {
            if best.as_ref().is_none_or(|(b, _, _)| v >= *b) {
                best = Some((v, stats.iteration, trainer.policy.clone()));
            }
            if config.evaluation.stop_at_success.is_some_and(|t| v >= t) {
                stopped_early = true;
                break;
            }
        }
    }
    let last = history.last().map_or(0, |r| r.stats.iteration);
    let (best_validation, best_iteration, best_policy) = match best {
        Some((v, i, p)) => (Some(v), i, p),
        None => (None, last, trainer.policy.clone()),
    };
    Ok(TrainOutcome {
        final_policy: trainer.policy,
        best_policy,
        best_iteration,
        best_validation,
        history,
        stopped_early,
    })
}

#[derive(Serialize)]
struct CurveRow<'a> {
    iteration: usize,
    mean_return: f64,
    success_rate: f64,
    kl: f64,
    surrogate_improvement: f64,
    accepted: bool,
    backtracks: usize,
    value_mse: f64,
    mean_std: f64,
    validation_success: Option<f64>,
    wall_time: f64,
    config_hash: &'a str,
    seed: u64,
}

pub fn write_learning_curve(path: &Path, history: &[IterationRecord], prov: &Provenance) -> Result<()> {
    let hash = prov.config_hash.as_str();
    write_rows(
        path,
        history.iter().map(|r| CurveRow {
            iteration: r.stats.iteration,
            mean_return: r.stats.mean_return,
            success_rate: r.stats.success_rate,
            kl: r.stats.kl,
            surrogate_improvement: r.stats.surrogate_improvement,
            accepted: r.stats.accepted,
            backtracks: r.stats.backtracks,
            value_mse: r.stats.value_mse_after,
            mean_std: r.stats.mean_std,
            validation_success: r.validation_success,
            wall_time: r.wall_time,
            config_hash: hash,
            seed: prov.seed,
        }),
    )
}

/// Files written by [`run_training`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainArtifacts {
    pub learning_curve: PathBuf,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: PathBuf,
    pub config_copy: PathBuf,
}

impl TrainArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        TrainArtifacts {
            learning_curve: dir.join("learning_curve.csv"),
            final_checkpoint: dir.join("final.ckpt"),
            best_checkpoint: dir.join("best.ckpt"),
            config_copy: dir.join("config.toml"),
        }
    }
}

/// Trains and writes the learning curve, both checkpoints and the resolved
/// config into `out_dir`.
pub fn run_training(
    config: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
    on_iteration: impl FnMut(&IterationRecord),
) -> Result<(TrainOutcome, TrainArtifacts)> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let outcome = train(config, seed, on_iteration)?;
    let files = TrainArtifacts::in_dir(out_dir);
    write_learning_curve(&files.learning_curve, &outcome.history, &Provenance::new(config, seed))?;
    checkpoint::save(&outcome.final_policy, &files.final_checkpoint)?;
    checkpoint::save(&outcome.best_policy, &files.best_checkpoint)?;
    let resolved = ExperimentConfig {
        seed,
        ..config.clone()
    };
    fs::write(&files.config_copy, resolved.to_toml())
        .map_err(|e| Error::io(format!("writing {}", files.config_copy.display()), e))?;
    Ok((outcome, files))
}
