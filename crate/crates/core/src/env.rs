//! Episodic pivoting MDP on top of the dynamics and actuation models.
//!
//! Observation: `[φt − φtgt, φ̇t, φg, φ̇g, d]`, both angles wrapped to (−π, π].
//! Action: `[u_arm, u_fing]`, each clamped to `[-1, 1]`; `u_arm` scales the arm acceleration limit and the sign
//! of `u_fing` picks the finger direction (|u_fing| < 0.1 holds). Reward per
//! control step is `−|φt − φtgt| / φ_RNG`, plus 1 while the tool is at the
//! target and stopped. Episodes always run for the full horizon.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actuation::{perturb_tool_params, substeps, ActuationConfig, Actuator, FingerDir};
use crate::dynamics::{normal_force, ArmParams, GripperParams, PivotModel, PivotState, ToolParams};
use crate::error::{Error, Result};

pub const OBS_DIM: usize = 5;
pub const ACT_DIM: usize = 2;

/// |u_fing| below this holds the fingers still.
pub const FINGER_DEAD_ZONE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    /// Range for both the initial and the target tool angle (rad).
    pub angle_range: [f64; 2],
    /// Reward normalizer φ_RNG (rad).
    pub angle_normalizer: f64,
    pub success_angle: f64,
    pub success_rate: f64,
    pub control_period: f64,
    pub physics_dt: f64,
    pub horizon: usize,
    pub arm_accel_limit: f64,
    /// Joint speed limit of the arm (rad/s); acceleration that would exceed it
    /// is cut off.
    pub arm_rate_limit: f64,
    /// Finger distance at reset; must produce a positive grip force.
    pub grasp_distance: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            angle_range: [-FRAC_PI_2, FRAC_PI_2],
            angle_normalizer: PI,
            success_angle: 0.05,
            success_rate: 0.1,
            control_period: 0.05,
            physics_dt: 1e-3,
            horizon: 200,
            arm_accel_limit: 20.0,
            arm_rate_limit: 4.0,
            grasp_distance: 0.025,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self, gripper: &GripperParams) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let [lo, hi] = self.angle_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("angle_range must be ordered and finite, got [{lo}, {hi}]"));
        }
        if !(self.angle_normalizer > 0.0) {
            return bad("angle_normalizer must be > 0".into());
        }
        if !(self.success_angle > 0.0 && self.success_rate > 0.0) {
            return bad("success thresholds must be > 0".into());
        }
        if !(self.physics_dt > 0.0 && self.control_period >= self.physics_dt) {
            return bad("need 0 < physics_dt <= control_period".into());
        }
        let ratio = self.control_period / self.physics_dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return bad(format!(
                "control_period ({}) must be an integer multiple of physics_dt ({})",
                self.control_period, self.physics_dt
            ));
        }
        if self.horizon == 0 {
            return bad("horizon must be > 0".into());
        }
        if !(self.arm_accel_limit > 0.0 && self.arm_rate_limit > 0.0) {
            return bad("arm_accel_limit and arm_rate_limit must be > 0".into());
        }
        let d = self.grasp_distance;
        if !(gripper.finger_min() <= d && d <= gripper.finger_max()) || normal_force(gripper, d) <= 0.0 {
            return bad(format!("grasp_distance {d} must lie in the finger range and squeeze the tool"));
        }
        Ok(())
    }
}

/// Everything needed to build an environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConfig {
    pub task: TaskConfig,
    pub model: PivotModel,
    pub actuation: ActuationConfig,
    /// Scales the static and Coulomb coefficients of the nominal tool before
    /// the per-episode perturbation.
    pub friction_multiplier: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            task: TaskConfig::default(),
            model: PivotModel::default(),
            actuation: ActuationConfig::default(),
            friction_multiplier: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn new(task: TaskConfig, tool: ToolParams, arm: ArmParams, gripper: GripperParams, actuation: ActuationConfig) -> Self {
        EnvConfig {
            task,
            model: PivotModel::new(tool, arm, gripper),
            actuation,
            friction_multiplier: 1.0,
        }
    }

    pub fn with_friction_multiplier(mut self, m: f64) -> Self {
        self.friction_multiplier = m;
        self
    }

    pub fn with_actuation(mut self, actuation: ActuationConfig) -> Self {
        self.actuation = actuation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate(&self.model.gripper)?;
        self.actuation.validate()?;
        if !(self.friction_multiplier.is_finite() && self.friction_multiplier > 0.0) {
            return Err(Error::InvalidParams(format!(
                "friction multiplier must be > 0, got {}",
                self.friction_multiplier
            )));
        }
        Ok(())
    }

    /// Nominal tool with the friction multiplier applied.
    pub fn nominal_tool(&self) -> Result<ToolParams> {
        let t = &self.model.tool;
        let m = self.friction_multiplier;
        t.with_friction(t.static_coeff() * m, t.coulomb_coeff() * m, t.viscous_coeff())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub arm: f64,
    pub finger: f64,
}

impl Action {
    pub fn new(arm: f64, finger: f64) -> Self {
        Action { arm, finger }
    }

    pub fn from_slice(a: &[f64]) -> Result<Self> {
        match a {
            [arm, finger] => Ok(Action::new(*arm, *finger)),
            _ => Err(Error::DimensionMismatch {
                expected: ACT_DIM,
                got: a.len(),
            }),
        }
    }

    /// Components clamped to [-1, 1]; NaN maps to 0.
    pub fn clamped(&self) -> Action {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        Action::new(c(self.arm), c(self.finger))
    }

    pub fn finger_dir(&self) -> FingerDir {
        let f = self.clamped().finger;
        if f.abs() < FINGER_DEAD_ZONE {
            FingerDir::Hold
        } else if f > 0.0 {
            FingerDir::Open
        } else {
            FingerDir::Close
        }
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

pub fn angle_error(state: &PivotState, target: f64) -> f64 {
    wrap_angle(state.tool_angle - target)
}

pub fn is_success(state: &PivotState, target: f64, task: &TaskConfig) -> bool {
    angle_error(state, target).abs() <= task.success_angle && state.tool_rate.abs() <= task.success_rate
}

pub fn reward(state: &PivotState, target: f64, task: &TaskConfig) -> f64 {
    let distance = -angle_error(state, target).abs() / task.angle_normalizer;
    let bonus = if is_success(state, target, task) { 1.0 } else { 0.0 };
    distance + bonus
}

/// Largest part of `accel` that keeps `|rate + accel·dt| <= limit`.
pub fn rate_limited(accel: f64, rate: f64, limit: f64, dt: f64) -> f64 {
    accel.clamp((-limit - rate) / dt, (limit - rate) / dt)
}

pub fn observe(state: &PivotState, target: f64) -> Observation {
    Observation([
        angle_error(state, target),
        state.tool_rate,
        wrap_angle(state.gripper_angle),
        state.gripper_rate,
        state.finger_distance,
    ])
}

#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub success: bool,
    pub state: PivotState,
    pub target: f64,
    pub step: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
struct Episode {
    model: PivotModel,
    state: PivotState,
    target: f64,
    actuator: Actuator,
    steps: usize,
}

#[derive(Debug, Clone)]
pub struct PivotEnv {
    config: EnvConfig,
    nominal_tool: ToolParams,
    episode: Option<Episode>,
}

impl PivotEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let nominal_tool = config.nominal_tool()?;
        Ok(PivotEnv {
            config,
            nominal_tool,
            episode: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Tool parameters of the current episode, after perturbation.
    pub fn episode_tool(&self) -> Option<&ToolParams> {
        self.episode.as_ref().map(|e| &e.model.tool)
    }

    pub fn state(&self) -> Option<&PivotState> {
        self.episode.as_ref().map(|e| &e.state)
    }

    pub fn target(&self) -> Option<f64> {
        self.episode.as_ref().map(|e| e.target)
    }

    /// Starts a new episode: draws initial and target angles, perturbs the
    /// tool's friction and reseeds the actuators from `rng`.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Observation> {
        let task = &self.config.task;
        let [lo, hi] = task.angle_range;
        let draw = |rng: &mut R| if lo < hi { rng.gen_range(lo..=hi) } else { lo };
        let initial = draw(rng);
        let target = draw(rng);
        let tool = perturb_tool_params(&self.nominal_tool, self.config.actuation.effective_friction_noise(), rng)?;
        let actuator = Actuator::new(self.config.actuation, rng.gen());
        let state = PivotState::at_rest(initial, task.grasp_distance);
        self.episode = Some(Episode {
            model: PivotModel::new(tool, self.config.model.arm, self.config.model.gripper),
            state,
            target,
            actuator,
            steps: 0,
        });
        Ok(observe(&state, target))
    }

    /// Applies `action` for one control period.
    pub fn step(&mut self, action: Action) -> Result<Transition> {
        let task = self.config.task;
        let ep = self.episode.as_mut().ok_or(Error::NotReset)?;
        if ep.steps >= task.horizon {
            return Err(Error::EpisodeFinished);
        }
        let action = action.clamped();
        ep.actuator
            .command(action.arm * task.arm_accel_limit, action.finger_dir(), task.control_period);
        let gripper = ep.model.gripper;
        let dt = task.physics_dt;
        for _ in 0..substeps(task.control_period, dt) {
            let accel = rate_limited(ep.actuator.arm_accel(dt), ep.state.gripper_rate, task.arm_rate_limit, dt);
            let inc = ep.actuator.finger_increment(ep.state.finger_distance, &gripper, dt);
            ep.state.finger_distance = gripper.clamp_fingers(ep.state.finger_distance + inc);
            ep.state = ep.model.step(&ep.state, accel, dt)?;
        }
        ep.steps += 1;
        let success = is_success(&ep.state, ep.target, &task);
        Ok(Transition {
            observation: observe(&ep.state, ep.target),
            reward: reward(&ep.state, ep.target, &task),
            done: ep.steps >= task.horizon,
            info: StepInfo {
                success,
                state: ep.state,
                target: ep.target,
                step: ep.steps,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ContactMode;
    use crate::rng::rng_from;

    fn env(actuation: ActuationConfig) -> PivotEnv {
        PivotEnv::new(EnvConfig::default().with_actuation(actuation)).unwrap()
    }

    fn moving(err: f64) -> PivotState {
        PivotState {
            tool_rate: 1.0,
            mode: ContactMode::Slipping,
            ..PivotState::at_rest(err, 0.03)
        }
    }

    #[test]
    fn reward_examples() {
        let task = TaskConfig::default();
        assert_eq!(reward(&PivotState::at_rest(0.3, 0.025), 0.3, &task), 1.0);
        assert!((reward(&moving(PI), 0.0, &task) + 1.0).abs() < 1e-15);
        assert!((reward(&moving(PI / 2.0), 0.0, &task) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn success_examples() {
        let task = TaskConfig::default();
        assert!(is_success(&PivotState::at_rest(0.2, 0.025), 0.2, &task));
        assert!(!is_success(&PivotState::at_rest(0.05 * 1.01, 0.025), 0.0, &task));
        let mut s = PivotState::at_rest(0.0, 0.025);
        s.tool_rate = 0.05;
        assert!(is_success(&s, 0.0, &task));
        s.tool_rate = 0.11;
        assert!(!is_success(&s, 0.0, &task));
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn action_mapping() {
        assert_eq!(Action::new(0.0, 0.05).finger_dir(), FingerDir::Hold);
        assert_eq!(Action::new(0.0, -0.05).finger_dir(), FingerDir::Hold);
        assert_eq!(Action::new(0.0, 0.5).finger_dir(), FingerDir::Open);
        assert_eq!(Action::new(0.0, -3.0).finger_dir(), FingerDir::Close);
        assert_eq!(Action::new(7.0, f64::NAN).clamped(), Action::new(1.0, 0.0));
        assert!(Action::from_slice(&[1.0]).is_err());
    }

    #[test]
    fn reset_angles_in_range() {
        let mut e = env(ActuationConfig::default());
        let mut rng = rng_from(0, &[]);
        let mut sum_target = 0.0;
        let n = 100_000;
        for i in 0..n {
            let obs = e.reset(&mut rng).unwrap();
            let s = e.state().unwrap();
            let t = e.target().unwrap();
            if i < 10_000 {
                assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&s.tool_angle));
                assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&t));
                assert_eq!(s.mode, ContactMode::Stuck);
                assert_eq!(obs.0[1], 0.0);
                assert!(normal_force(&e.config().model.gripper, s.finger_distance) > 0.0);
            }
            sum_target += t;
        }
        let mean = sum_target / n as f64;
        assert!(mean.abs() <= 0.02, "target mean {mean}");
    }

    #[test]
    fn reset_deterministic() {
        let mut a = env(ActuationConfig::default());
        let mut b = env(ActuationConfig::default());
        assert_eq!(
            a.reset(&mut rng_from(5, &[])).unwrap(),
            b.reset(&mut rng_from(5, &[])).unwrap()
        );
        assert_eq!(a.episode_tool(), b.episode_tool());
    }

    #[test]
    fn step_lifecycle() {
        let mut e = env(ActuationConfig::default());
        assert!(matches!(e.step(Action::new(0.0, 0.0)), Err(Error::NotReset)));
        e.reset(&mut rng_from(1, &[])).unwrap();
        let horizon = e.config().task.horizon;
        for k in 1..=horizon {
            let t = e.step(Action::new(0.3, 0.0)).unwrap();
            assert_eq!(t.done, k == horizon);
            assert!((-1.0..=1.0).contains(&t.reward));
            assert!(t.observation.0.iter().all(|v| v.is_finite()));
        }
        assert!(matches!(e.step(Action::new(0.0, 0.0)), Err(Error::EpisodeFinished)));
    }

    #[test]
    fn inaction_preserves_stiction() {
        let mut e = env(ActuationConfig::default());
        let mut rng = rng_from(2, &[]);
        e.reset(&mut rng).unwrap();
        let start = e.state().unwrap().tool_angle;
        let target = e.target().unwrap();
        assert_ne!(start, target);
        for _ in 0..20 {
            let t = e.step(Action::new(0.0, 0.0)).unwrap();
            assert_eq!(t.info.state.tool_angle, start);
            assert!(t.reward < 0.0 || t.info.success);
        }
    }

    #[test]
    fn closing_fingers_saturates_grip() {
        let mut e = env(ActuationConfig::default());
        e.reset(&mut rng_from(3, &[])).unwrap();
        let gripper = e.config().model.gripper;
        let mut last_force = normal_force(&gripper, e.state().unwrap().finger_distance);
        for _ in 0..20 {
            let t = e.step(Action::new(0.0, -1.0)).unwrap();
            let f = normal_force(&gripper, t.info.state.finger_distance);
            assert!(f >= last_force);
            last_force = f;
        }
        assert_eq!(e.state().unwrap().finger_distance, gripper.finger_min());
    }

    #[test]
    fn idealized_step_is_deterministic() {
        let run = || {
            let mut e = env(ActuationConfig::idealized());
            e.reset(&mut rng_from(4, &[])).unwrap();
            (0..50)
                .map(|k| {
                    let a = Action::new((k as f64 * 0.3).sin(), (k as f64 * 0.2).cos());
                    e.step(a).unwrap().info.state
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn scripted_swing_crosses_target() {
        // Open the fingers, swing the arm, close again: the tool lags the arm
        // and the angle error changes sign.
        let mut e = env(ActuationConfig::idealized());
        e.reset(&mut rng_from(6, &[])).unwrap();
        let err0 = observe(e.state().unwrap(), e.target().unwrap()).0[0];
        let push = if err0 > 0.0 { 1.0 } else { -1.0 };
        let mut crossed = false;
        for _ in 0..4 {
            e.step(Action::new(0.0, 1.0)).unwrap();
        }
        for _ in 0..40 {
            let t = e.step(Action::new(push, 1.0)).unwrap();
            if t.observation.0[0] * err0 < 0.0 {
                crossed = true;
                break;
            }
        }
        for _ in 0..8 {
            e.step(Action::new(0.0, -1.0)).unwrap();
        }
        assert!(crossed, "angle error never changed sign");
    }

    #[test]
    fn arm_speed_is_capped() {
        assert_eq!(rate_limited(5.0, 0.0, 4.0, 1e-3), 5.0);
        assert!((rate_limited(20.0, 3.99, 4.0, 1e-3) - 10.0).abs() < 1e-9);
        assert!((rate_limited(20.0, -4.0, 4.0, 1e-3) - 20.0).abs() < 1e-12);
        let mut e = env(ActuationConfig::idealized());
        e.reset(&mut rng_from(7, &[])).unwrap();
        let limit = e.config().task.arm_rate_limit;
        for _ in 0..40 {
            let t = e.step(Action::new(1.0, 0.0)).unwrap();
            assert!(t.info.state.gripper_rate <= limit + 1e-9);
        }
        assert!((e.state().unwrap().gripper_rate - limit).abs() < 1e-9);
    }

    #[test]
    fn task_validation() {
        let g = GripperParams::default();
        let mut t = TaskConfig::default();
        assert!(t.validate(&g).is_ok());
        t.physics_dt = 0.0015;
        assert!(t.validate(&g).is_err());
        let mut t = TaskConfig::default();
        t.grasp_distance = 0.035;
        assert!(t.validate(&g).is_err());
        let mut t = TaskConfig::default();
        t.horizon = 0;
        assert!(t.validate(&g).is_err());
    }
}
