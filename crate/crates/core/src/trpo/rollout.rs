//! On-policy rollout collection and generalized advantage estimation.

use rayon::prelude::*;

use crate::env::{Action, PivotEnv, ACT_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{GaussianPolicy, ValueNet};
use crate::rng::{rng_from, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub total_reward: f64,
    /// Success condition held at the last step.
    pub final_success: bool,
    pub final_abs_error: f64,
}

/// Flat per-step arrays for a set of complete, contiguous episodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub observations: Vec<[f64; OBS_DIM]>,
    /// Raw policy samples, before the environment clamps them.
    pub actions: Vec<[f64; ACT_DIM]>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub episode_ids: Vec<usize>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
    pub episodes: Vec<EpisodeSummary>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn mean_return(&self) -> f64 {
        self.episodes.iter().map(|e| e.total_reward).sum::<f64>() / self.episodes.len().max(1) as f64
    }

    pub fn success_rate(&self) -> f64 {
        self.episodes.iter().filter(|e| e.final_success).count() as f64 / self.episodes.len().max(1) as f64
    }

    fn append(&mut self, mut other: RolloutBatch) {
        self.observations.append(&mut other.observations);
        self.actions.append(&mut other.actions);
        self.rewards.append(&mut other.rewards);
        self.dones.append(&mut other.dones);
        self.episode_ids.append(&mut other.episode_ids);
        self.returns.append(&mut other.returns);
        self.advantages.append(&mut other.advantages);
        self.episodes.append(&mut other.episodes);
    }
}

/// Runs one episode with actions sampled from `policy`.
pub fn run_episode(env: &mut PivotEnv, policy: &GaussianPolicy, seed: u64, episode_id: usize) -> Result<RolloutBatch> {
    let mut env_rng = rng_from(seed, &[stream::ENV]);
    let mut policy_rng = rng_from(seed, &[stream::POLICY]);
    let mut obs = env.reset(&mut env_rng)?;
    let horizon = env.config().task.horizon;
    let mut batch = RolloutBatch::default();
    let mut total = 0.0;
    loop {
        let a = policy.sample_action(obs.as_slice(), &mut policy_rng)?;
        let t = env.step(Action::from_slice(&a)?)?;
        batch.observations.push(obs.0);
        batch.actions.push([a[0], a[1]]);
        batch.rewards.push(t.reward);
        batch.dones.push(t.done);
        batch.episode_ids.push(episode_id);
        total += t.reward;
        obs = t.observation;
        if t.done {
            batch.episodes.push(EpisodeSummary {
                total_reward: total,
                final_success: t.info.success,
                final_abs_error: t.observation.0[0].abs(),
            });
            break;
        }
        debug_assert!(batch.len() < horizon);
    }
    Ok(batch)
}

/// Collects `n_episodes` full episodes. Episode `i` is seeded from
/// `derive_seed(seed, [i])`, episodes run in parallel, and the batch is
/// assembled in episode order, so the result does not depend on the number
/// of worker threads.
pub fn collect_rollouts<F>(env_factory: &F, policy: &GaussianPolicy, n_episodes: usize, seed: u64) -> Result<RolloutBatch>
where
    F: Fn() -> Result<PivotEnv> + Sync,
{
    if n_episodes == 0 {
        return Err(Error::InvalidParams("n_episodes must be >= 1".into()));
    }
    let parts = (0..n_episodes)
        .into_par_iter()
        .map(|i| {
            let mut env = env_factory()?;
            run_episode(&mut env, policy, crate::rng::derive_seed(seed, &[i as u64]), i)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut batch = RolloutBatch::default();
    for part in parts {
        batch.append(part);
    }
    Ok(batch)
}

/// Generalized advantage estimates over contiguous episodes.
///
/// `δ_t = r_t + γ V(s_{t+1}) (1 − done_t) − V(s_t)` and
/// `A_t = Σ_k (γλ)^k δ_{t+k}`, the sum stopping at the end of the episode.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], discount: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let terminal = dones[t] || t + 1 == n;
        let next_value = if terminal { 0.0 } else { values[t + 1] };
        if terminal {
            running = 0.0;
        }
        let delta = rewards[t] + discount * next_value - values[t];
        running = delta + discount * lambda * running;
        adv[t] = running;
    }
    adv
}

/// Shifts to zero mean and scales to unit (population) standard deviation.
/// A constant input is only centered.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    for v in values.iter_mut() {
        *v -= mean;
    }
    let std = (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    if std > 1e-12 {
        for v in values.iter_mut() {
            *v /= std;
        }
    }
}

/// Fills `returns` (`A_t + V(s_t)`, before normalization) and normalized
/// `advantages`.
pub fn compute_advantages(batch: &mut RolloutBatch, value_net: &ValueNet, discount: f64, lambda: f64) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidParams("empty rollout batch".into()));
    }
    let values = batch
        .observations
        .iter()
        .map(|o| value_net.value(o))
        .collect::<Result<Vec<_>>>()?;
    let adv = gae(&batch.rewards, &values, &batch.dones, discount, lambda);
    batch.returns = adv.iter().zip(&values).map(|(a, v)| a + v).collect();
    batch.advantages = adv;
    normalize(&mut batch.advantages);
    Ok(())
}
