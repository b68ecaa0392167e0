//! The TRPO update: natural-gradient direction by conjugate gradient on
//! Fisher-vector products, KL-constrained backtracking line search, and
//! baseline regression.

use rand::seq::SliceRandom;

use super::cg::{conjugate_gradient, dot};
use super::rollout::{collect_rollouts, compute_advantages, RolloutBatch};
use super::TrpoConfig;
use crate::env::{PivotEnv, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{GaussianPolicy, ValueNet};
use crate::rng::{derive_seed, rng_from, stream};

/// `log π_old(a_t | s_t)` for every step of the batch.
pub fn log_probs(policy: &GaussianPolicy, batch: &RolloutBatch) -> Result<Vec<f64>> {
    batch
        .observations
        .iter()
        .zip(&batch.actions)
        .map(|(o, a)| policy.log_prob(o, a))
        .collect()
}

/// Importance-weighted surrogate `mean_t exp(log π(a|s) − log π_old(a|s)) · A_t`.
pub fn surrogate_loss(policy: &GaussianPolicy, old_log_probs: &[f64], batch: &RolloutBatch) -> Result<f64> {
    let mut total = 0.0;
    for ((o, a), (lp_old, adv)) in batch
        .observations
        .iter()
        .zip(&batch.actions)
        .zip(old_log_probs.iter().zip(&batch.advantages))
    {
        total += (policy.log_prob(o, a)? - lp_old).exp() * adv;
    }
    Ok(total / batch.len().max(1) as f64)
}

pub fn surrogate_grad(policy: &GaussianPolicy, old_log_probs: &[f64], batch: &RolloutBatch) -> Result<Vec<f64>> {
    let n = batch.len().max(1) as f64;
    let mut grad = vec![0.0; policy.num_params()];
    for ((o, a), (lp_old, adv)) in batch
        .observations
        .iter()
        .zip(&batch.actions)
        .zip(old_log_probs.iter().zip(&batch.advantages))
    {
        let ratio = (policy.log_prob(o, a)? - lp_old).exp();
        policy.accumulate_log_prob_grad(o, a, ratio * adv / n, &mut grad)?;
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub params: Vec<f64>,
    pub accepted: bool,
    pub kl: f64,
    pub improvement: f64,
    /// Number of step shrinks before acceptance (or the limit on rejection).
    pub backtracks: usize,
}

/// Backtracks from `old + full_step` by `ratio` until the measured mean
/// KL(old ‖ new) is within `max_kl` and the surrogate strictly improves. If no
/// candidate qualifies within `max_backtracks` shrinks, the old parameters are
/// returned unchanged.
pub fn line_search(
    old: &GaussianPolicy,
    old_log_probs: &[f64],
    batch: &RolloutBatch,
    full_step: &[f64],
    max_kl: f64,
    ratio: f64,
    max_backtracks: usize,
) -> Result<LineSearchResult> {
    let theta = old.params();
    let base = surrogate_loss(old, old_log_probs, batch)?;
    let reject = LineSearchResult {
        params: theta.clone(),
        accepted: false,
        kl: 0.0,
        improvement: 0.0,
        backtracks: max_backtracks,
    };
    if full_step.iter().all(|&s| s == 0.0) {
        return Ok(reject);
    }
    let mut scale = 1.0;
    for k in 0..=max_backtracks {
        let candidate: Vec<f64> = theta.iter().zip(full_step).map(|(t, s)| t + scale * s).collect();
        if let Ok(policy) = old.with_params(&candidate) {
            let kl = policy.kl_from(old, &batch.observations)?;
            let improvement = surrogate_loss(&policy, old_log_probs, batch)? - base;
            if kl.is_finite() && kl <= max_kl && improvement > 0.0 {
                return Ok(LineSearchResult {
                    params: candidate,
                    accepted: true,
                    kl,
                    improvement,
                    backtracks: k,
                });
            }
        }
        scale *= ratio;
    }
    Ok(reject)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueFitReport {
    pub mse_before: f64,
    pub mse_after: f64,
    pub epochs_accepted: usize,
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Regresses the baseline on `batch.returns` with minibatch Adam. An epoch
/// that raises the full-batch MSE is rolled back and the step size halved,
/// so the MSE never increases across epochs.
pub fn fit_value_function(value_net: &mut ValueNet, batch: &RolloutBatch, config: &TrpoConfig, seed: u64) -> Result<ValueFitReport> {
    if batch.returns.len() != batch.len() {
        return Err(Error::InvalidParams("returns have not been computed".into()));
    }
    let obs: &[[f64; OBS_DIM]] = &batch.observations;
    let mse_before = value_net.mse(obs, &batch.returns)?;
    let mut best = mse_before;
    let mut lr = config.value_lr;
    let mut adam = Adam::new(value_net.num_params());
    let mut rng = rng_from(seed, &[]);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut accepted = 0;
    for _ in 0..config.value_epochs {
        let snapshot = (value_net.params().to_vec(), adam.clone());
        order.shuffle(&mut rng);
        let mut params = value_net.params().to_vec();
        for chunk in order.chunks(config.value_minibatch.max(1)) {
            let grad = value_net.mse_grad(obs, &batch.returns, chunk)?;
            adam.step(&mut params, &grad, lr);
            if value_net.set_params(&params).is_err() {
                break;
            }
        }
        let mse = value_net.mse(obs, &batch.returns).unwrap_or(f64::INFINITY);
        if mse.is_finite() && mse <= best {
            best = mse;
            accepted += 1;
        } else {
            value_net.set_params(&snapshot.0)?;
            adam = snapshot.1;
            lr *= 0.5;
        }
    }
    Ok(ValueFitReport {
        mse_before,
        mse_after: best,
        epochs_accepted: accepted,
    })
}

/// Natural-gradient step `s = sqrt(2δ / xᵀHx) · x` with `x ≈ H⁻¹g`.
pub fn natural_step(policy: &GaussianPolicy, batch: &RolloutBatch, grad: &[f64], config: &TrpoConfig) -> Result<Vec<f64>> {
    if grad.iter().all(|&g| g == 0.0) {
        return Ok(vec![0.0; grad.len()]);
    }
    let fvp = |v: &[f64]| policy.fisher_vector_product(&batch.observations, v, config.cg_damping);
    let x = conjugate_gradient(fvp, grad, config.cg_iters, 1e-10)?.x;
    let xhx = dot(&x, &policy.fisher_vector_product(&batch.observations, &x, config.cg_damping)?);
    if !(xhx > 0.0 && xhx.is_finite()) {
        return Ok(vec![0.0; grad.len()]);
    }
    let scale = (2.0 * config.max_kl / xhx).sqrt();
    Ok(x.into_iter().map(|v| v * scale).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub kl: f64,
    pub surrogate_improvement: f64,
    pub accepted: bool,
    pub backtracks: usize,
    pub value_mse_before: f64,
    pub value_mse_after: f64,
    pub mean_std: f64,
}

/// Updates `policy` in place from an already collected batch with computed
/// advantages; the value net is refit afterwards.
pub fn update(
    policy: &mut GaussianPolicy,
    value_net: &mut ValueNet,
    batch: &RolloutBatch,
    config: &TrpoConfig,
    seed: u64,
) -> Result<(LineSearchResult, ValueFitReport)> {
    let old_lp = log_probs(policy, batch)?;
    let grad = surrogate_grad(policy, &old_lp, batch)?;
    let step = natural_step(policy, batch, &grad, config)?;
    let ls = line_search(
        policy,
        &old_lp,
        batch,
        &step,
        config.max_kl,
        config.backtrack_ratio,
        config.max_backtracks,
    )?;
    policy.set_params(&ls.params)?;
    let fit = fit_value_function(value_net, batch, config, seed)?;
    Ok((ls, fit))
}

/// Rollouts, advantages, policy step and baseline fit for one iteration.
pub struct Trainer<F> {
    env_factory: F,
    pub config: TrpoConfig,
    pub policy: GaussianPolicy,
    pub value_net: ValueNet,
    seed: u64,
    iteration: usize,
}

impl<F> Trainer<F>
where
    F: Fn() -> Result<PivotEnv> + Sync,
{
    pub fn new(env_factory: F, config: TrpoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = rng_from(seed, &[stream::INIT]);
        let policy = GaussianPolicy::pivot(config.init_log_std, &mut init)?;
        let value_net = ValueNet::pivot(&mut init)?;
        Ok(Trainer {
            env_factory,
            config,
            policy,
            value_net,
            seed,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn collect(&self) -> Result<RolloutBatch> {
        let seed = derive_seed(self.seed, &[stream::TRAIN, self.iteration as u64]);
        collect_rollouts(&self.env_factory, &self.policy, self.config.episodes_per_iter, seed)
    }

    pub fn step(&mut self) -> Result<IterationStats> {
        let mut batch = self.collect()?;
        compute_advantages(&mut batch, &self.value_net, self.config.discount, self.config.gae_lambda)?;
        let fit_seed = derive_seed(self.seed, &[stream::TRAIN, self.iteration as u64, 1]);
        let (ls, fit) = update(&mut self.policy, &mut self.value_net, &batch, &self.config, fit_seed)?;
        let stats = IterationStats {
            iteration: self.iteration,
            mean_return: batch.mean_return(),
            success_rate: batch.success_rate(),
            kl: ls.kl,
            surrogate_improvement: ls.improvement,
            accepted: ls.accepted,
            backtracks: ls.backtracks,
            value_mse_before: fit.mse_before,
            value_mse_after: fit.mse_after,
            mean_std: self.policy.log_std().iter().map(|l| l.exp()).sum::<f64>() / self.policy.act_dim() as f64,
        };
        self.iteration += 1;
        Ok(stats)
    }
}
