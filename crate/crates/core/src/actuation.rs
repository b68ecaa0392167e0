//! Non-ideal command execution.
//!
//! Every control period the arm and the fingers receive a new command. In the
//! modeled (non-idealized) mode each command
//!
//! * takes effect only after a random delay, during which the previous command
//!   keeps running,
//! * is executed with a random gain: the arm's velocity ramps linearly at
//!   `cmd · η`, the fingers move in steps of `dir · v_f · dt · η`,
//!
//! and the tool's friction coefficients are re-drawn once per episode. All
//! noise is uniform on `[1 - frac, 1 + frac]` (delays on `[0, frac · period]`),
//! so the configured fractions are hard bounds.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::dynamics::{GripperParams, ToolParams};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuationConfig {
    pub friction_noise_frac: f64,
    /// Largest command delay as a fraction of the control period.
    pub delay_frac_max: f64,
    pub ramp_noise_frac: f64,
    pub finger_step_noise_frac: f64,
    /// Instantaneous, exact execution with nominal friction.
    pub idealized: bool,
}

impl Default for ActuationConfig {
    fn default() -> Self {
        ActuationConfig {
            friction_noise_frac: 0.10,
            delay_frac_max: 0.10,
            ramp_noise_frac: 0.10,
            finger_step_noise_frac: 0.10,
            idealized: false,
        }
    }
}

impl ActuationConfig {
    pub fn idealized() -> Self {
        ActuationConfig {
            idealized: true,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("friction_noise_frac", self.friction_noise_frac),
            ("delay_frac_max", self.delay_frac_max),
            ("ramp_noise_frac", self.ramp_noise_frac),
            ("finger_step_noise_frac", self.finger_step_noise_frac),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParams(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Friction noise actually applied at reset (zero when idealized).
    pub fn effective_friction_noise(&self) -> f64 {
        if self.idealized {
            0.0
        } else {
            self.friction_noise_frac
        }
    }
}

fn noisy_gain<R: Rng + ?Sized>(frac: f64, rng: &mut R) -> f64 {
    if frac == 0.0 {
        1.0
    } else {
        rng.gen_range(1.0 - frac..=1.0 + frac)
    }
}

/// Scales each friction coefficient of `tool` by an independent factor drawn
/// uniformly from `[1 - frac, 1 + frac]`. Mass and geometry are untouched. If
/// the draw leaves the static coefficient below the Coulomb one, the static
/// coefficient is raised to match.
pub fn perturb_tool_params<R: Rng + ?Sized>(tool: &ToolParams, frac: f64, rng: &mut R) -> Result<ToolParams> {
    if !(0.0..=1.0).contains(&frac) {
        return Err(Error::InvalidParams(format!("friction noise must be in [0, 1], got {frac}")));
    }
    if frac == 0.0 {
        return Ok(*tool);
    }
    let static_coeff = tool.static_coeff() * noisy_gain(frac, rng);
    let coulomb_coeff = tool.coulomb_coeff() * noisy_gain(frac, rng);
    let viscous_coeff = tool.viscous_coeff() * noisy_gain(frac, rng);
    tool.with_friction(static_coeff.max(coulomb_coeff), coulomb_coeff, viscous_coeff)
}

/// Commanded direction of finger motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FingerDir {
    /// Decrease the finger distance (squeeze harder).
    Close,
    #[default]
    Hold,
    Open,
}

impl FingerDir {
    pub fn sign(self) -> f64 {
        match self {
            FingerDir::Close => -1.0,
            FingerDir::Hold => 0.0,
            FingerDir::Open => 1.0,
        }
    }
}

/// Internal state of the actuators between sub-steps.
#[derive(Debug, Clone)]
pub struct ActuatorState {
    /// Acceleration currently applied to the arm, gain included.
    pub active_arm_accel: f64,
    /// Next arm acceleration (gain included), applied once the delay runs out.
    pub pending_arm_accel: f64,
    pub arm_delay_remaining: f64,
    pub active_finger_dir: FingerDir,
    pub active_finger_gain: f64,
    pub pending_finger_dir: FingerDir,
    pub pending_finger_gain: f64,
    pub finger_delay_remaining: f64,
    rng: SimRng,
}

impl ActuatorState {
    fn new(seed: u64) -> Self {
        ActuatorState {
            active_arm_accel: 0.0,
            pending_arm_accel: 0.0,
            arm_delay_remaining: 0.0,
            active_finger_dir: FingerDir::Hold,
            active_finger_gain: 1.0,
            pending_finger_dir: FingerDir::Hold,
            pending_finger_gain: 1.0,
            finger_delay_remaining: 0.0,
            rng: SimRng::seed_from_u64(seed),
        }
    }
}

// Sub-step timing slack so accumulated dt round-off never postpones a command.
const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Actuator {
    config: ActuationConfig,
    state: ActuatorState,
}

impl Actuator {
    pub fn new(config: ActuationConfig, seed: u64) -> Self {
        Actuator {
            config,
            state: ActuatorState::new(seed),
        }
    }

    pub fn config(&self) -> &ActuationConfig {
        &self.config
    }

    pub fn state(&self) -> &ActuatorState {
        &self.state
    }

    /// Issues a new arm acceleration and finger direction at the start of a
    /// control period. Delays and gains are drawn independently for the arm
    /// and the fingers, once per command.
    pub fn command(&mut self, arm_accel: f64, finger: FingerDir, control_period: f64) {
        let s = &mut self.state;
        if self.config.idealized {
            s.active_arm_accel = arm_accel;
            s.pending_arm_accel = arm_accel;
            s.arm_delay_remaining = 0.0;
            s.active_finger_dir = finger;
            s.pending_finger_dir = finger;
            s.active_finger_gain = 1.0;
            s.pending_finger_gain = 1.0;
            s.finger_delay_remaining = 0.0;
            return;
        }
        let max_delay = self.config.delay_frac_max * control_period;
        let draw_delay = |rng: &mut SimRng| {
            if max_delay > 0.0 {
                rng.gen_range(0.0..=max_delay)
            } else {
                0.0
            }
        };
        s.arm_delay_remaining = draw_delay(&mut s.rng);
        s.pending_arm_accel = arm_accel * noisy_gain(self.config.ramp_noise_frac, &mut s.rng);
        s.finger_delay_remaining = draw_delay(&mut s.rng);
        s.pending_finger_dir = finger;
        s.pending_finger_gain = noisy_gain(self.config.finger_step_noise_frac, &mut s.rng);
    }

    /// Arm acceleration to apply over the next sub-step of length `dt`.
    pub fn arm_accel(&mut self, dt: f64) -> f64 {
        let s = &mut self.state;
        if s.arm_delay_remaining <= TIME_EPS {
            s.active_arm_accel = s.pending_arm_accel;
            s.arm_delay_remaining = 0.0;
        } else {
            s.arm_delay_remaining = (s.arm_delay_remaining - dt).max(0.0);
        }
        s.active_arm_accel
    }

    /// Change in finger distance over the next sub-step, clamped so that
    /// `finger_distance + increment` stays in the gripper's range.
    pub fn finger_increment(&mut self, finger_distance: f64, gripper: &GripperParams, dt: f64) -> f64 {
        let s = &mut self.state;
        if s.finger_delay_remaining <= TIME_EPS {
            s.active_finger_dir = s.pending_finger_dir;
            s.active_finger_gain = s.pending_finger_gain;
            s.finger_delay_remaining = 0.0;
        } else {
            s.finger_delay_remaining = (s.finger_delay_remaining - dt).max(0.0);
        }
        let step = s.active_finger_dir.sign() * gripper.finger_speed() * dt * s.active_finger_gain;
        gripper.clamp_fingers(finger_distance + step) - finger_distance
    }

    /// Commands `arm_accel` and returns the acceleration applied at each of
    /// the `round(control_period / dt)` sub-steps of the period.
    pub fn arm_response(&mut self, arm_accel: f64, dt: f64, control_period: f64) -> Vec<f64> {
        let n = substeps(control_period, dt);
        self.command(arm_accel, self.state.pending_finger_dir, control_period);
        (0..n).map(|_| self.arm_accel(dt)).collect()
    }
}

/// Number of physics sub-steps in one control period.
pub fn substeps(control_period: f64, dt: f64) -> usize {
    (control_period / dt).round().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn tool() -> ToolParams {
        ToolParams::new(0.1, 0.01, 0.1, 0.02, 0.01, 0.1).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = rng_from(1, &[]);
        assert_eq!(perturb_tool_params(&tool(), 0.0, &mut rng).unwrap(), tool());
    }

    #[test]
    fn perturbation_bounds_over_seeds() {
        for seed in 0..10_000 {
            let mut rng = rng_from(seed, &[]);
            let p = perturb_tool_params(&tool(), 0.1, &mut rng).unwrap();
            assert!((0.009..=0.011).contains(&p.coulomb_coeff()), "{}", p.coulomb_coeff());
            assert!(p.static_coeff() >= p.coulomb_coeff());
            assert_eq!(p.mass(), 0.1);
            assert_eq!(p.inertia(), 0.01);
            assert_eq!(p.com_distance(), 0.1);
        }
    }

    #[test]
    fn perturbation_mean_scale_is_one() {
        let base = ToolParams::new(0.1, 0.01, 0.1, 1.0, 1.0, 1.0).unwrap();
        let mut rng = rng_from(42, &[]);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| perturb_tool_params(&base, 0.1, &mut rng).unwrap().viscous_coeff())
            .sum::<f64>()
            / n as f64;
        assert!((0.999..=1.001).contains(&mean), "mean scale {mean}");
    }

    #[test]
    fn perturbation_reclamps_static() {
        // γ == μc: roughly half of the draws put γ' below μc'.
        let base = ToolParams::new(0.1, 0.01, 0.1, 0.01, 0.01, 0.1).unwrap();
        let mut rng = rng_from(3, &[]);
        for _ in 0..1000 {
            let p = perturb_tool_params(&base, 0.5, &mut rng).unwrap();
            assert!(p.static_coeff() >= p.coulomb_coeff());
        }
        assert!(perturb_tool_params(&base, 1.5, &mut rng).is_err());
    }

    #[test]
    fn idealized_arm_is_pass_through() {
        let mut act = Actuator::new(ActuationConfig::idealized(), 9);
        let trace = act.arm_response(2.0, 1e-3, 0.05);
        assert_eq!(trace.len(), 50);
        assert!(trace.iter().all(|&a| a == 2.0));
    }

    #[test]
    fn null_arm_command_gives_zero_trace() {
        for seed in 0..100 {
            let mut act = Actuator::new(ActuationConfig::default(), seed);
            assert!(act.arm_response(0.0, 1e-3, 0.05).iter().all(|&a| a == 0.0));
        }
    }

    #[test]
    fn arm_delay_bounded() {
        let cfg = ActuationConfig::default();
        for seed in 0..1000 {
            let mut act = Actuator::new(cfg, seed);
            let dt = 1e-3;
            let trace = act.arm_response(5.0, dt, 0.1);
            let first = trace.iter().position(|&a| a != 0.0).expect("command must take effect");
            let t = first as f64 * dt;
            assert!((0.0..=0.01 + 1e-12).contains(&t), "seed {seed}: first response at {t}");
            for &a in &trace[first..] {
                assert!((4.5..=5.5).contains(&a));
            }
        }
    }

    #[test]
    fn previous_command_runs_during_delay() {
        let cfg = ActuationConfig {
            delay_frac_max: 1.0,
            ramp_noise_frac: 0.0,
            ..Default::default()
        };
        let mut act = Actuator::new(cfg, 5);
        act.arm_response(1.0, 1e-3, 0.05);
        let trace = act.arm_response(-1.0, 1e-3, 0.05);
        let switch = trace.iter().position(|&a| a == -1.0).unwrap_or(trace.len());
        assert!(trace[..switch].iter().all(|&a| a == 1.0));
        assert!(trace[switch..].iter().all(|&a| a == -1.0));
    }

    #[test]
    fn finger_hold_and_clamp() {
        let g = GripperParams::new(1000.0, 0.03, 0.02, 0.04, 0.05).unwrap();
        let mut act = Actuator::new(ActuationConfig::default(), 1);
        act.command(0.0, FingerDir::Hold, 0.05);
        for _ in 0..50 {
            assert_eq!(act.finger_increment(0.025, &g, 1e-3), 0.0);
        }
        act.command(0.0, FingerDir::Close, 0.05);
        for _ in 0..50 {
            assert_eq!(act.finger_increment(0.02, &g, 1e-3), 0.0);
        }
    }

    #[test]
    fn finger_step_bounds() {
        let g = GripperParams::new(1000.0, 0.03, 0.02, 0.04, 0.05).unwrap();
        for seed in 0..1000 {
            let mut act = Actuator::new(ActuationConfig::default(), seed);
            act.command(0.0, FingerDir::Open, 0.05);
            let incs: Vec<f64> = (0..50).map(|_| act.finger_increment(0.025, &g, 1e-3)).collect();
            let moving: Vec<f64> = incs.into_iter().filter(|&x| x != 0.0).collect();
            assert!(!moving.is_empty());
            for inc in moving {
                assert!((4.5e-5 - 1e-18..=5.5e-5 + 1e-18).contains(&inc), "{inc}");
            }
        }
    }

    #[test]
    fn equal_seeds_equal_traces() {
        let run = |seed| {
            let mut act = Actuator::new(ActuationConfig::default(), seed);
            let mut out = Vec::new();
            for k in 0..20 {
                let cmd = (k as f64 * 0.7).sin() * 10.0;
                out.extend(act.arm_response(cmd, 1e-3, 0.05));
            }
            out
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn config_validation() {
        assert!(ActuationConfig::default().validate().is_ok());
        let bad = ActuationConfig {
            ramp_noise_frac: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
