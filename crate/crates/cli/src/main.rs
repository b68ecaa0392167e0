use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pivot_core::actuation::ActuationConfig;
use pivot_core::experiments::{
    evaluate_policy, friction_sweep, plot, run_training, test_seed, transfer_study, write_summary, write_sweep,
    write_traces, write_transfer, ExperimentConfig, Provenance,
};
use pivot_core::nn::checkpoint;

/// Tool-pivoting simulator and TRPO trainer.
#[derive(Parser)]
#[command(name = "pivot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy; writes learning_curve.csv, best.ckpt, final.ckpt and config.toml.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides output_dir in the config file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Evaluate a checkpoint with mean actions on held-out trials.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        friction_multiplier: f64,
        /// Evaluate with idealized actuation instead of the configured one.
        #[arg(long)]
        idealized: bool,
        /// Directory for eval_traces.csv and eval_summary.csv (default: next to the checkpoint).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint across friction multipliers.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated; defaults to the config's sweep_multipliers.
        #[arg(long, value_delimiter = ',')]
        multipliers: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV (default: sweep.csv next to the checkpoint).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train with idealized and with modeled actuation and cross-evaluate.
    Transfer {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds; defaults to the config seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Summarize a learning-curve or trace CSV as an SVG chart or a CSV table.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        /// `.svg` for a chart, anything else for a CSV summary.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::load(path)?)
}

fn sibling_dir(checkpoint: &Path) -> PathBuf {
    checkpoint
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            config,
            seed,
            out,
            quiet,
        } => {
            let cfg = load_config(&config)?;
            let seed = seed.unwrap_or(cfg.seed);
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let (outcome, files) = run_training(&cfg, seed, &out, |r| {
                if quiet {
                    return;
                }
                let s = &r.stats;
                let val = r.validation_success.map_or(String::new(), |v| format!("  validation {v:.2}"));
                println!(
                    "iter {:4}  return {:8.2}  success {:.2}  kl {:.5}{val}",
                    s.iteration, s.mean_return, s.success_rate, s.kl
                );
            })?;
            let report = evaluate_policy(&outcome.best_policy, &cfg.env(), cfg.eval_trials, test_seed(seed))?;
            println!(
                "best iteration {} (validation {}), held-out success {:.2} over {} trials{}",
                outcome.best_iteration,
                outcome.best_validation.map_or("n/a".into(), |v| format!("{v:.2}")),
                report.success_rate(),
                report.trials.len(),
                if outcome.stopped_early { ", stopped early" } else { "" }
            );
            println!("wrote {}", files.learning_curve.display());
        }
        Command::Eval {
            checkpoint: ckpt,
            config,
            trials,
            seed,
            friction_multiplier,
            idealized,
            out,
        } => {
            let cfg = load_config(&config)?;
            let policy = checkpoint::load(&ckpt)?;
            let seed = seed.unwrap_or(cfg.seed);
            let trials = trials.unwrap_or(cfg.eval_trials);
            if trials == 0 {
                bail!("--trials must be >= 1");
            }
            let mut env = cfg.env().with_friction_multiplier(friction_multiplier);
            if idealized {
                env = env.with_actuation(ActuationConfig::idealized());
            }
            env.validate()?;
            let report = evaluate_policy(&policy, &env, trials, test_seed(seed))?;
            let dir = out.unwrap_or_else(|| sibling_dir(&ckpt));
            create_dir(&dir)?;
            let prov = Provenance::new(&cfg, seed);
            write_traces(&dir.join("eval_traces.csv"), &report, &prov)?;
            write_summary(&dir.join("eval_summary.csv"), &report, &env, &prov)?;
            println!(
                "success {}/{} ({:.2}), mean final |error| {:.4} rad",
                report.successes(),
                trials,
                report.success_rate(),
                report.mean_final_error()
            );
        }
        Command::Sweep {
            checkpoint: ckpt,
            config,
            multipliers,
            trials,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let policy = checkpoint::load(&ckpt)?;
            let seed = seed.unwrap_or(cfg.seed);
            let multipliers = multipliers.unwrap_or_else(|| cfg.evaluation.sweep_multipliers.clone());
            let trials = trials.unwrap_or(cfg.eval_trials);
            let points = friction_sweep(&policy, &cfg.env(), &multipliers, trials, test_seed(seed))?;
            let out = out.unwrap_or_else(|| sibling_dir(&ckpt).join("sweep.csv"));
            write_sweep(&out, &points, &Provenance::new(&cfg, seed))?;
            println!("multiplier  success");
            for p in &points {
                println!("{:10.2}  {:.2}", p.multiplier, p.success_rate());
            }
            println!("wrote {}", out.display());
        }
        Command::Transfer {
            config,
            seeds,
            out,
            quiet,
        } => {
            let cfg = load_config(&config)?;
            let seeds = seeds.unwrap_or_else(|| vec![cfg.seed]);
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            create_dir(&dir)?;
            for seed in seeds {
                let m = transfer_study(&cfg, seed, |which, r| {
                    if !quiet && r.validation_success.is_some() {
                        println!(
                            "seed {seed} policy {which} iter {:4}  validation {:.2}",
                            r.stats.iteration,
                            r.validation_success.unwrap_or(0.0)
                        );
                    }
                })?;
                let path = dir.join(format!("transfer_seed{seed}.csv"));
                write_transfer(&path, &m, &Provenance::new(&cfg, seed))?;
                println!("seed {seed}            idealized  real-proxy");
                println!("  A (idealized)     {:.2}       {:.2}", m.a_on_idealized, m.a_on_proxy);
                println!("  B (modeled)       {:.2}       {:.2}", m.b_on_idealized, m.b_on_proxy);
                println!("  gap on real proxy: {:+.0} points; wrote {}", m.proxy_gap_points(), path.display());
            }
        }
        Command::Plot { csv, out } => {
            let kind = plot::plot(&csv, &out)?;
            println!("{kind:?} summary written to {}", out.display());
        }
    }
    Ok(())
}
