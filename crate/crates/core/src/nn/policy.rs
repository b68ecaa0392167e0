//! Diagonal-Gaussian policy and state-value baseline.
//!
//! Both networks see observations through a fixed affine [`ObsNormalizer`].
//! The policy's flat parameter vector is the mean network's parameters
//! followed by the state-independent log standard deviations.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{Mlp, Trace};
use crate::env::{ACT_DIM, OBS_DIM};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5; // ln(2π)

/// Fixed per-feature map `(x - shift) * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsNormalizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ObsNormalizer {
    pub fn identity(dim: usize) -> Self {
        ObsNormalizer {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Scales for `[angle error, tool rate, gripper angle, gripper rate,
    /// finger distance]` around the default gripper's contact distance.
    pub fn pivot_default() -> Self {
        ObsNormalizer {
            shift: vec![0.0, 0.0, 0.0, 0.0, 0.03],
            scale: vec![1.0, 0.2, 0.2, 0.2, 100.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, s), k)| (v - s) * k)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    mean_net: Mlp,
    log_std: Vec<f64>,
    normalizer: ObsNormalizer,
}

/// Mean and standard deviation of the action distribution at one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDist {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl ActionDist {
    pub fn log_prob(&self, action: &[f64]) -> f64 {
        -0.5 * self
            .mean
            .iter()
            .zip(&self.log_std)
            .zip(action)
            .map(|((mu, ls), a)| {
                let z = (a - mu) / ls.exp();
                z * z + 2.0 * ls + LN_2PI
            })
            .sum::<f64>()
    }

    /// KL(self ‖ other).
    pub fn kl(&self, other: &ActionDist) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(other.mean.iter().zip(&other.log_std))
            .map(|((m0, l0), (m1, l1))| {
                let v0 = (2.0 * l0).exp();
                let v1 = (2.0 * l1).exp();
                l1 - l0 + (v0 + (m0 - m1).powi(2)) / (2.0 * v1) - 0.5
            })
            .sum()
    }
}

impl GaussianPolicy {
    pub fn new(mean_net: Mlp, log_std: Vec<f64>, normalizer: ObsNormalizer) -> Result<Self> {
        if log_std.len() != mean_net.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: mean_net.output_dim(),
                got: log_std.len(),
            });
        }
        if normalizer.dim() != mean_net.input_dim() || normalizer.scale.len() != normalizer.dim() {
            return Err(Error::DimensionMismatch {
                expected: mean_net.input_dim(),
                got: normalizer.dim(),
            });
        }
        if log_std.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("log_std"));
        }
        Ok(GaussianPolicy {
            mean_net,
            log_std,
            normalizer,
        })
    }

    /// The pivoting policy: 5 → 32 → 16 → 2 mean network, output layer scaled
    /// down so the initial mean is close to zero.
    pub fn pivot<R: Rng + ?Sized>(init_log_std: f64, rng: &mut R) -> Result<Self> {
        let net = Mlp::standard(OBS_DIM, ACT_DIM, 0.01, rng)?;
        GaussianPolicy::new(net, vec![init_log_std; ACT_DIM], ObsNormalizer::pivot_default())
    }

    pub fn mean_net(&self) -> &Mlp {
        &self.mean_net
    }
    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }
    pub fn normalizer(&self) -> &ObsNormalizer {
        &self.normalizer
    }
    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }
    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn num_params(&self) -> usize {
        self.mean_net.num_params() + self.log_std.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mean_net.params().to_vec();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let (net, ls) = params.split_at(self.mean_net.num_params());
        if ls.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("log_std"));
        }
        self.mean_net.set_params(net)?;
        self.log_std.copy_from_slice(ls);
        Ok(())
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        let mut p = self.clone();
        p.set_params(params)?;
        Ok(p)
    }

    fn net_trace(&self, obs: &[f64]) -> Result<Trace> {
        self.mean_net.trace(&self.normalizer.apply(obs))
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.forward(&self.normalizer.apply(obs))
    }

    pub fn dist(&self, obs: &[f64]) -> Result<ActionDist> {
        Ok(ActionDist {
            mean: self.mean(obs)?,
            log_std: self.log_std.clone(),
        })
    }

    /// `mean + std ⊙ ξ`, `ξ ~ N(0, I)`. Clamping is left to the environment.
    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let mean = self.mean(obs)?;
        Ok(mean
            .iter()
            .zip(&self.log_std)
            .map(|(mu, ls)| {
                let xi: f64 = rng.sample(StandardNormal);
                mu + ls.exp() * xi
            })
            .collect())
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.act_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.act_dim(),
                got: action.len(),
            });
        }
        Ok(self.dist(obs)?.log_prob(action))
    }

    /// Adds `weight · ∇θ log π(action | obs)` into `grad`.
    pub fn accumulate_log_prob_grad(&self, obs: &[f64], action: &[f64], weight: f64, grad: &mut [f64]) -> Result<()> {
        let trace = self.net_trace(obs)?;
        let mu = trace.output();
        let n_net = self.mean_net.num_params();
        let mut upstream = vec![0.0; self.act_dim()];
        for i in 0..self.act_dim() {
            let inv_var = (-2.0 * self.log_std[i]).exp();
            let diff = action[i] - mu[i];
            upstream[i] = weight * diff * inv_var;
            grad[n_net + i] += weight * (diff * diff * inv_var - 1.0);
        }
        self.mean_net.backward(&trace, &upstream, &mut grad[..n_net]);
        Ok(())
    }

    pub fn log_prob_grad(&self, obs: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.num_params()];
        self.accumulate_log_prob_grad(obs, action, 1.0, &mut g)?;
        Ok(g)
    }

    /// Mean over `observations` of KL(`old` ‖ `self`).
    pub fn kl_from<O: AsRef<[f64]>>(&self, old: &GaussianPolicy, observations: &[O]) -> Result<f64> {
        if observations.is_empty() {
            return Err(Error::InvalidParams("KL over an empty batch".into()));
        }
        let mut total = 0.0;
        for obs in observations {
            total += old.dist(obs.as_ref())?.kl(&self.dist(obs.as_ref())?);
        }
        Ok(total / observations.len() as f64)
    }

    /// Gradient with respect to `self`'s parameters of the mean KL(`old` ‖ `self`).
    pub fn kl_grad<O: AsRef<[f64]>>(&self, old: &GaussianPolicy, observations: &[O]) -> Result<Vec<f64>> {
        let n = observations.len() as f64;
        let n_net = self.mean_net.num_params();
        let mut grad = vec![0.0; self.num_params()];
        for obs in observations {
            let old_mu = old.mean(obs.as_ref())?;
            let trace = self.net_trace(obs.as_ref())?;
            let mu = trace.output();
            let mut upstream = vec![0.0; self.act_dim()];
            for i in 0..self.act_dim() {
                let inv_var = (-2.0 * self.log_std[i]).exp();
                let old_var = (2.0 * old.log_std[i]).exp();
                let diff = mu[i] - old_mu[i];
                upstream[i] = diff * inv_var / n;
                grad[n_net + i] += (1.0 - (old_var + diff * diff) * inv_var) / n;
            }
            self.mean_net.backward(&trace, &upstream, &mut grad[..n_net]);
        }
        Ok(grad)
    }

    /// `H v + damping · v`, where `H` is the Hessian of the mean KL(self ‖ θ)
    /// at `θ = self`. For a diagonal Gaussian with state-independent log-std
    /// this is `Jμᵀ Σ⁻¹ Jμ` on the mean parameters and `2 I` on the log-std,
    /// evaluated with one forward-mode and one reverse-mode pass per sample.
    pub fn fisher_vector_product<O: AsRef<[f64]>>(&self, observations: &[O], v: &[f64], damping: f64) -> Result<Vec<f64>> {
        if v.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: v.len(),
            });
        }
        if observations.is_empty() {
            return Err(Error::InvalidParams("Fisher product over an empty batch".into()));
        }
        let n = observations.len() as f64;
        let n_net = self.mean_net.num_params();
        let (v_net, v_ls) = v.split_at(n_net);
        let inv_var: Vec<f64> = self.log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
        let mut out = vec![0.0; v.len()];
        for obs in observations {
            let x = self.normalizer.apply(obs.as_ref());
            let (_, jv) = self.mean_net.jvp(&x, v_net)?;
            let trace = self.mean_net.trace(&x)?;
            let upstream: Vec<f64> = jv.iter().zip(&inv_var).map(|(j, w)| j * w / n).collect();
            self.mean_net.backward(&trace, &upstream, &mut out[..n_net]);
        }
        for (o, vi) in out[n_net..].iter_mut().zip(v_ls) {
            *o = 2.0 * vi;
        }
        for (o, vi) in out.iter_mut().zip(v) {
            *o += damping * vi;
        }
        Ok(out)
    }
}

/// Closed-form log density of a diagonal Gaussian; exposed for tests and tools.
pub fn gaussian_log_density(mean: &[f64], std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(std)
        .zip(x)
        .map(|((m, s), v)| -0.5 * ((v - m) / s).powi(2) - s.ln() - 0.5 * (2.0 * PI).ln())
        .sum()
}

/// State-value baseline. Outputs are `output_scale · net(normalized obs)` so
/// the network works at unit scale while returns span tens of units.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    net: Mlp,
    normalizer: ObsNormalizer,
    output_scale: f64,
}

impl ValueNet {
    pub fn new(net: Mlp, normalizer: ObsNormalizer, output_scale: f64) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: net.output_dim(),
            });
        }
        if normalizer.dim() != net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.input_dim(),
                got: normalizer.dim(),
            });
        }
        Ok(ValueNet {
            net,
            normalizer,
            output_scale,
        })
    }

    pub fn pivot<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        ValueNet::new(Mlp::standard(OBS_DIM, 1, 1.0, rng)?, ObsNormalizer::pivot_default(), 20.0)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }
    pub fn num_params(&self) -> usize {
        self.net.num_params()
    }
    pub fn params(&self) -> &[f64] {
        self.net.params()
    }
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.net.set_params(params)
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.output_scale * self.net.forward(&self.normalizer.apply(obs))?[0])
    }

    /// Mean squared error against `targets`.
    pub fn mse(&self, observations: &[[f64; OBS_DIM]], targets: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (obs, t) in observations.iter().zip(targets) {
            total += (self.value(obs)? - t).powi(2);
        }
        Ok(total / observations.len().max(1) as f64)
    }

    /// Gradient of [`mse`](Self::mse) over the given subset of indices.
    pub fn mse_grad(&self, observations: &[[f64; OBS_DIM]], targets: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
        let n = indices.len().max(1) as f64;
        let mut grad = vec![0.0; self.num_params()];
        for &i in indices {
            let trace = self.net.trace(&self.normalizer.apply(&observations[i]))?;
            let v = self.output_scale * trace.output()[0];
            let upstream = [2.0 * (v - targets[i]) * self.output_scale / n];
            self.net.backward(&trace, &upstream, &mut grad);
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn tiny_policy(mu: f64, log_std: f64) -> GaussianPolicy {
        // 1 → 1 linear net with zero weight: mean = bias.
        let net = Mlp::from_params(&[1, 1], vec![0.0, mu]).unwrap();
        GaussianPolicy::new(net, vec![log_std], ObsNormalizer::identity(1)).unwrap()
    }

    #[test]
    fn log_prob_closed_forms() {
        let p = tiny_policy(0.0, 0.0);
        assert!((p.log_prob(&[0.0], &[0.0]).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-15);
        let d = ActionDist {
            mean: vec![0.3, -0.2],
            log_std: vec![0.0, 0.0],
        };
        assert!((d.log_prob(&[0.3, -0.2]) + (2.0 * PI).ln()).abs() < 1e-14);
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let lp = d.log_prob(&[0.3 + 0.1 * k as f64, -0.2]);
            assert!(lp < last);
            last = lp;
        }
        let lp = d.log_prob(&[0.7, 0.1]);
        assert!((lp - gaussian_log_density(&[0.3, -0.2], &[1.0, 1.0], &[0.7, 0.1])).abs() < 1e-14);
    }

    #[test]
    fn kl_closed_forms() {
        let a = ActionDist {
            mean: vec![0.0],
            log_std: vec![0.0],
        };
        let b = ActionDist {
            mean: vec![1.0],
            log_std: vec![0.0],
        };
        assert_eq!(a.kl(&a), 0.0);
        assert!((a.kl(&b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_nonnegative_on_random_pairs() {
        let mut rng = rng_from(10, &[]);
        for _ in 0..1000 {
            let mut draw = || ActionDist {
                mean: vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
                log_std: vec![rng.gen_range(-2.0..1.0), rng.gen_range(-2.0..1.0)],
            };
            let (p, q) = (draw(), draw());
            assert!(p.kl(&q) >= 0.0);
        }
    }

    #[test]
    fn kl_self_is_zero_on_batch() {
        let mut rng = rng_from(11, &[]);
        let p = GaussianPolicy::pivot(-0.5, &mut rng).unwrap();
        let obs: Vec<[f64; 5]> = (0..50).map(|k| [k as f64 * 0.01, 0.1, -0.2, 0.3, 0.025]).collect();
        assert!(p.kl_from(&p, &obs).unwrap().abs() < 1e-12);
        assert!(p.kl_from::<[f64; 5]>(&p, &[]).is_err());
    }

    #[test]
    fn degenerate_noise_returns_mean() {
        let mut rng = rng_from(12, &[]);
        let p = GaussianPolicy::pivot(1e-9f64.ln(), &mut rng).unwrap();
        let obs = [0.4, 0.0, 0.1, 0.0, 0.025];
        let mean = p.mean(&obs).unwrap();
        let a = p.sample_action(&obs, &mut rng).unwrap();
        for (x, m) in a.iter().zip(&mean) {
            assert!((x - m).abs() < 1e-6);
        }
    }

    #[test]
    fn sample_std_matches() {
        let mut rng = rng_from(13, &[]);
        let p = GaussianPolicy::pivot(-0.7, &mut rng).unwrap();
        let obs = [0.4, 0.0, 0.1, 0.0, 0.025];
        let mean = p.mean(&obs).unwrap();
        let n = 100_000;
        let mut ss = [0.0; 2];
        for _ in 0..n {
            let a = p.sample_action(&obs, &mut rng).unwrap();
            for i in 0..2 {
                ss[i] += (a[i] - mean[i]).powi(2);
            }
        }
        for s in ss {
            let std = (s / n as f64).sqrt();
            assert!((std / (-0.7f64).exp() - 1.0).abs() < 0.02, "{std}");
        }
    }

    #[test]
    fn equal_seeds_equal_actions() {
        let p = GaussianPolicy::pivot(0.0, &mut rng_from(14, &[])).unwrap();
        let obs = [0.4, 0.0, 0.1, 0.0, 0.025];
        let a = p.sample_action(&obs, &mut rng_from(1, &[])).unwrap();
        let b = p.sample_action(&obs, &mut rng_from(1, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn params_round_trip() {
        let mut p = GaussianPolicy::pivot(0.0, &mut rng_from(15, &[])).unwrap();
        let mut theta = p.params();
        assert_eq!(theta.len(), p.num_params());
        *theta.last_mut().unwrap() = -1.5;
        p.set_params(&theta).unwrap();
        assert_eq!(p.log_std()[1], -1.5);
        assert!(p.set_params(&theta[1..]).is_err());
    }

    #[test]
    fn fvp_zero_vector() {
        let p = GaussianPolicy::pivot(0.0, &mut rng_from(16, &[])).unwrap();
        let obs = vec![[0.1, 0.2, 0.3, 0.4, 0.025]; 4];
        let hv = p.fisher_vector_product(&obs, &vec![0.0; p.num_params()], 0.1).unwrap();
        assert!(hv.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn value_net_shapes() {
        let v = ValueNet::pivot(&mut rng_from(17, &[])).unwrap();
        assert!(v.value(&[0.0; 5]).unwrap().is_finite());
        assert!(v.value(&[0.0; 4]).is_err());
        assert!(ValueNet::new(Mlp::zeros(&[5, 2]).unwrap(), ObsNormalizer::identity(5), 1.0).is_err());
    }
}
