//! Under-actuated gripper/tool dynamics with stick-slip friction at the pivot.
//!
//! The system is a planar two-link chain. The first link is the gripper, driven
//! by a commanded angular acceleration. The second link is the tool, which has
//! no motor and is coupled to the gripper only through inertia, gravity and the
//! friction torque transmitted by the fingers:
//!
//! ```text
//! (I + m r² + m l r cos φt) φ̈g + (I + m r²) φ̈t + m l r sin(φt) φ̇g² + m g r cos(φg + φt) = τf
//! ```
//!
//! `φt` is the tool angle measured relative to the gripper link, so `φ̇t` is the
//! relative sliding rate seen by the contact and the friction law uses it directly.
//!
//! Contact is a two-mode automaton. In [`ContactMode::Stuck`] the tool moves
//! rigidly with the gripper as long as the torque required to do so stays within
//! the static bound `γ f_n`. Otherwise it slips under viscous plus Coulomb
//! friction. A slipping tool re-sticks when its relative rate crosses zero (or
//! drops below [`SNAP_RATE`]) and the static bound can hold it; a tool that
//! just broke away slips for at least one step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative rate (rad/s) below which a slipping tool is a candidate for re-sticking.
pub const SNAP_RATE: f64 = 1e-3;

/// Physical constants of the grasped tool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ToolParamsSpec", into = "ToolParamsSpec")]
pub struct ToolParams {
    mass: f64,
    inertia: f64,
    com_distance: f64,
    static_coeff: f64,
    coulomb_coeff: f64,
    viscous_coeff: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToolParamsSpec {
    mass: f64,
    inertia: f64,
    com_distance: f64,
    static_coeff: f64,
    coulomb_coeff: f64,
    viscous_coeff: f64,
}

impl TryFrom<ToolParamsSpec> for ToolParams {
    type Error = Error;

    fn try_from(s: ToolParamsSpec) -> Result<Self> {
        ToolParams::new(
            s.mass,
            s.inertia,
            s.com_distance,
            s.static_coeff,
            s.coulomb_coeff,
            s.viscous_coeff,
        )
    }
}

impl From<ToolParams> for ToolParamsSpec {
    fn from(t: ToolParams) -> Self {
        ToolParamsSpec {
            mass: t.mass,
            inertia: t.inertia,
            com_distance: t.com_distance,
            static_coeff: t.static_coeff,
            coulomb_coeff: t.coulomb_coeff,
            viscous_coeff: t.viscous_coeff,
        }
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParams(msg()))
    }
}

impl ToolParams {
    /// Builds a validated tool.
    ///
    /// `static_coeff` must be at least `coulomb_coeff`, otherwise breaking
    /// stiction would switch to a kinetic torque larger than the one that failed.
    pub fn new(
        mass: f64,
        inertia: f64,
        com_distance: f64,
        static_coeff: f64,
        coulomb_coeff: f64,
        viscous_coeff: f64,
    ) -> Result<Self> {
        let all = [
            mass,
            inertia,
            com_distance,
            static_coeff,
            coulomb_coeff,
            viscous_coeff,
        ];
        require(all.iter().all(|v| v.is_finite()), || {
            "tool parameters must be finite".into()
        })?;
        require(mass > 0.0, || format!("tool mass must be > 0, got {mass}"))?;
        require(inertia > 0.0, || {
            format!("tool inertia must be > 0, got {inertia}")
        })?;
        require(com_distance >= 0.0, || {
            format!("com_distance must be >= 0, got {com_distance}")
        })?;
        require(
            static_coeff >= 0.0 && coulomb_coeff >= 0.0 && viscous_coeff >= 0.0,
            || "friction coefficients must be >= 0".into(),
        )?;
        require(static_coeff >= coulomb_coeff, || {
            format!("static_coeff ({static_coeff}) must be >= coulomb_coeff ({coulomb_coeff})")
        })?;
        Ok(ToolParams {
            mass,
            inertia,
            com_distance,
            static_coeff,
            coulomb_coeff,
            viscous_coeff,
        })
    }

    /// Same tool with different friction coefficients.
    pub fn with_friction(&self, static_coeff: f64, coulomb_coeff: f64, viscous_coeff: f64) -> Result<Self> {
        ToolParams::new(
            self.mass,
            self.inertia,
            self.com_distance,
            static_coeff,
            coulomb_coeff,
            viscous_coeff,
        )
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn inertia(&self) -> f64 {
        self.inertia
    }
    pub fn com_distance(&self) -> f64 {
        self.com_distance
    }
    pub fn static_coeff(&self) -> f64 {
        self.static_coeff
    }
    pub fn coulomb_coeff(&self) -> f64 {
        self.coulomb_coeff
    }
    pub fn viscous_coeff(&self) -> f64 {
        self.viscous_coeff
    }

    /// Inertia about the pivot, `I + m r²`.
    pub fn pivot_inertia(&self) -> f64 {
        self.inertia + self.mass * self.com_distance * self.com_distance
    }
}

impl Default for ToolParams {
    /// A spatula-sized tool held near its end.
    fn default() -> Self {
        ToolParams {
            mass: 0.15,
            inertia: 6.0e-4,
            com_distance: 0.08,
            static_coeff: 0.04,
            coulomb_coeff: 0.03,
            viscous_coeff: 2.0e-3,
        }
    }
}

/// Plane the arm moves in. Gravity only acts on the tool in the vertical plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArmParamsSpec", into = "ArmParamsSpec")]
pub struct ArmParams {
    link_length: f64,
    gravity: f64,
    plane: Plane,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmParamsSpec {
    link_length: f64,
    gravity: f64,
    plane: Plane,
}

impl TryFrom<ArmParamsSpec> for ArmParams {
    type Error = Error;
    fn try_from(s: ArmParamsSpec) -> Result<Self> {
        ArmParams::new(s.link_length, s.gravity, s.plane)
    }
}

impl From<ArmParams> for ArmParamsSpec {
    fn from(a: ArmParams) -> Self {
        ArmParamsSpec {
            link_length: a.link_length,
            gravity: a.gravity,
            plane: a.plane,
        }
    }
}

impl ArmParams {
    pub fn new(link_length: f64, gravity: f64, plane: Plane) -> Result<Self> {
        require(link_length.is_finite() && link_length > 0.0, || {
            format!("link_length must be > 0, got {link_length}")
        })?;
        require(gravity.is_finite() && gravity >= 0.0, || {
            format!("gravity must be >= 0, got {gravity}")
        })?;
        Ok(ArmParams {
            link_length,
            gravity,
            plane,
        })
    }

    pub fn link_length(&self) -> f64 {
        self.link_length
    }
    pub fn gravity(&self) -> f64 {
        self.gravity
    }
    pub fn plane(&self) -> Plane {
        self.plane
    }

    /// Gravity as seen by the tool: zero in the horizontal plane.
    pub fn effective_gravity(&self) -> f64 {
        match self.plane {
            Plane::Horizontal => 0.0,
            Plane::Vertical => self.gravity,
        }
    }
}

impl Default for ArmParams {
    fn default() -> Self {
        ArmParams {
            link_length: 0.3,
            gravity: 9.81,
            plane: Plane::Horizontal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GripperParamsSpec", into = "GripperParamsSpec")]
pub struct GripperParams {
    stiffness: f64,
    contact_distance: f64,
    finger_min: f64,
    finger_max: f64,
    finger_speed: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GripperParamsSpec {
    stiffness: f64,
    contact_distance: f64,
    finger_min: f64,
    finger_max: f64,
    finger_speed: f64,
}

impl TryFrom<GripperParamsSpec> for GripperParams {
    type Error = Error;
    fn try_from(s: GripperParamsSpec) -> Result<Self> {
        GripperParams::new(
            s.stiffness,
            s.contact_distance,
            s.finger_min,
            s.finger_max,
            s.finger_speed,
        )
    }
}

impl From<GripperParams> for GripperParamsSpec {
    fn from(g: GripperParams) -> Self {
        GripperParamsSpec {
            stiffness: g.stiffness,
            contact_distance: g.contact_distance,
            finger_min: g.finger_min,
            finger_max: g.finger_max,
            finger_speed: g.finger_speed,
        }
    }
}

impl GripperParams {
    pub fn new(
        stiffness: f64,
        contact_distance: f64,
        finger_min: f64,
        finger_max: f64,
        finger_speed: f64,
    ) -> Result<Self> {
        let all = [stiffness, contact_distance, finger_min, finger_max, finger_speed];
        require(all.iter().all(|v| v.is_finite()), || {
            "gripper parameters must be finite".into()
        })?;
        require(stiffness > 0.0, || format!("stiffness must be > 0, got {stiffness}"))?;
        require(
            0.0 <= finger_min && finger_min < contact_distance && contact_distance <= finger_max,
            || {
                format!(
                    "need 0 <= finger_min < contact_distance <= finger_max, got {finger_min}, {contact_distance}, {finger_max}"
                )
            },
        )?;
        require(finger_speed > 0.0, || {
            format!("finger_speed must be > 0, got {finger_speed}")
        })?;
        Ok(GripperParams {
            stiffness,
            contact_distance,
            finger_min,
            finger_max,
            finger_speed,
        })
    }

    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }
    pub fn contact_distance(&self) -> f64 {
        self.contact_distance
    }
    pub fn finger_min(&self) -> f64 {
        self.finger_min
    }
    pub fn finger_max(&self) -> f64 {
        self.finger_max
    }
    pub fn finger_speed(&self) -> f64 {
        self.finger_speed
    }

    pub fn clamp_fingers(&self, d: f64) -> f64 {
        d.clamp(self.finger_min, self.finger_max)
    }
}

impl Default for GripperParams {
    fn default() -> Self {
        GripperParams {
            stiffness: 500.0,
            contact_distance: 0.03,
            finger_min: 0.02,
            finger_max: 0.04,
            finger_speed: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactMode {
    Stuck,
    Slipping,
}

/// Full continuous state of the gripper/tool pair plus the contact mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotState {
    pub gripper_angle: f64,
    pub gripper_rate: f64,
    /// Tool angle relative to the gripper link.
    pub tool_angle: f64,
    /// Relative rate; exactly zero whenever `mode` is `Stuck`.
    pub tool_rate: f64,
    pub finger_distance: f64,
    pub mode: ContactMode,
}

impl PivotState {
    /// Gripper at rest with the tool stuck at `tool_angle`.
    pub fn at_rest(tool_angle: f64, finger_distance: f64) -> Self {
        PivotState {
            gripper_angle: 0.0,
            gripper_rate: 0.0,
            tool_angle,
            tool_rate: 0.0,
            finger_distance,
            mode: ContactMode::Stuck,
        }
    }

    fn is_finite(&self) -> bool {
        self.gripper_angle.is_finite()
            && self.gripper_rate.is_finite()
            && self.tool_angle.is_finite()
            && self.tool_rate.is_finite()
            && self.finger_distance.is_finite()
    }
}

/// Grip force from the linear finger deformation model, clamped at zero once
/// the fingers are at or beyond the contact distance.
pub fn normal_force(gripper: &GripperParams, finger_distance: f64) -> f64 {
    (gripper.stiffness * (gripper.contact_distance - finger_distance)).max(0.0)
}

/// Viscous plus Coulomb torque opposing a nonzero relative rate.
pub fn kinetic_friction_torque(tool: &ToolParams, normal: f64, tool_rate: f64) -> Result<f64> {
    if tool_rate == 0.0 {
        return Err(Error::ZeroSlipRate);
    }
    Ok(-tool.viscous_coeff * tool_rate - tool.coulomb_coeff * normal * tool_rate.signum())
}

/// Largest torque the contact can transmit without slipping.
pub fn static_friction_bound(tool: &ToolParams, normal: f64) -> f64 {
    tool.static_coeff * normal
}

/// Contact torque that keeps the tool's relative acceleration at zero.
pub fn stick_torque_required(
    tool: &ToolParams,
    arm: &ArmParams,
    state: &PivotState,
    arm_accel: f64,
) -> f64 {
    let m = tool.mass;
    let r = tool.com_distance;
    let mlr = m * arm.link_length * r;
    let coupled = tool.pivot_inertia() + mlr * state.tool_angle.cos();
    coupled * arm_accel
        + mlr * state.tool_angle.sin() * state.gripper_rate * state.gripper_rate
        + m * arm.effective_gravity() * r * (state.gripper_angle + state.tool_angle).cos()
}

/// Relative tool acceleration produced by contact torque `friction` under the
/// gripper acceleration `arm_accel`.
pub fn tool_acceleration(
    tool: &ToolParams,
    arm: &ArmParams,
    state: &PivotState,
    arm_accel: f64,
    friction: f64,
) -> f64 {
    (friction - stick_torque_required(tool, arm, state, arm_accel)) / tool.pivot_inertia()
}

/// Tool, arm and gripper constants bundled for stepping.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PivotModel {
    pub tool: ToolParams,
    pub arm: ArmParams,
    pub gripper: GripperParams,
}

impl PivotModel {
    pub fn new(tool: ToolParams, arm: ArmParams, gripper: GripperParams) -> Self {
        PivotModel { tool, arm, gripper }
    }

    fn holds(&self, state: &PivotState, arm_accel: f64, bound: f64) -> bool {
        stick_torque_required(&self.tool, &self.arm, state, arm_accel).abs() <= bound
    }

    /// Advances the system by one semi-implicit Euler step of length `dt`
    /// under gripper acceleration `arm_accel`. Velocities update first, then
    /// positions use the new velocities.
    pub fn step(&self, state: &PivotState, arm_accel: f64, dt: f64) -> Result<PivotState> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt must be finite and > 0, got {dt}")));
        }
        if !arm_accel.is_finite() {
            return Err(Error::NonFinite("arm acceleration"));
        }
        if !state.is_finite() {
            return Err(Error::NonFinite("pivot state"));
        }

        let normal = normal_force(&self.gripper, state.finger_distance);
        let bound = static_friction_bound(&self.tool, normal);
        let gripper_rate = state.gripper_rate + arm_accel * dt;
        let gripper_angle = state.gripper_angle + gripper_rate * dt;

        let at_rest = state.mode == ContactMode::Stuck || state.tool_rate == 0.0;
        if at_rest && self.holds(state, arm_accel, bound) {
            return Ok(PivotState {
                gripper_angle,
                gripper_rate,
                tool_angle: state.tool_angle,
                tool_rate: 0.0,
                finger_distance: state.finger_distance,
                mode: ContactMode::Stuck,
            });
        }

        let friction = if state.tool_rate == 0.0 {
            // Breakaway: Coulomb torque opposes the impending direction, which is
            // the sign of -required. |required| > γ f_n ≥ μc f_n keeps it moving.
            let required = stick_torque_required(&self.tool, &self.arm, state, arm_accel);
            self.tool.coulomb_coeff * normal * required.signum()
        } else {
            kinetic_friction_torque(&self.tool, normal, state.tool_rate)?
        };
        let accel = tool_acceleration(&self.tool, &self.arm, state, arm_accel, friction);
        let tool_rate = state.tool_rate + accel * dt;

        // A breakaway step always slips; re-sticking is only considered for a
        // tool that was already moving.
        let was_moving = state.tool_rate != 0.0;
        let crossed = was_moving && tool_rate * state.tool_rate <= 0.0;
        if was_moving && (crossed || tool_rate.abs() < SNAP_RATE) {
            let candidate = PivotState {
                gripper_angle,
                gripper_rate,
                tool_angle: state.tool_angle,
                tool_rate: 0.0,
                finger_distance: state.finger_distance,
                mode: ContactMode::Stuck,
            };
            if self.holds(&candidate, arm_accel, bound) {
                return Ok(candidate);
            }
        }

        let next = PivotState {
            gripper_angle,
            gripper_rate,
            tool_angle: state.tool_angle + tool_rate * dt,
            tool_rate,
            finger_distance: state.finger_distance,
            mode: ContactMode::Slipping,
        };
        if !next.is_finite() {
            return Err(Error::NonFinite("integrated state"));
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gripper_k1000() -> GripperParams {
        GripperParams::new(1000.0, 0.03, 0.02, 0.04, 0.05).unwrap()
    }

    fn reference_tool() -> ToolParams {
        ToolParams::new(0.1, 0.01, 0.1, 0.02, 0.01, 0.1).unwrap()
    }

    fn horizontal(l: f64) -> ArmParams {
        ArmParams::new(l, 9.81, Plane::Horizontal).unwrap()
    }

    #[test]
    fn normal_force_linear_and_clamped() {
        let g = gripper_k1000();
        assert_eq!(normal_force(&g, 0.03), 0.0);
        assert_eq!(normal_force(&g, 0.04), 0.0);
        assert_relative_eq!(normal_force(&g, 0.02), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn kinetic_friction_opposes_rate() {
        let tool = reference_tool();
        assert_relative_eq!(kinetic_friction_torque(&tool, 10.0, 2.0).unwrap(), -0.3, epsilon = 1e-15);
        assert_relative_eq!(kinetic_friction_torque(&tool, 10.0, -2.0).unwrap(), 0.3, epsilon = 1e-15);
        let frictionless = tool.with_friction(0.0, 0.0, 0.0).unwrap();
        assert_eq!(kinetic_friction_torque(&frictionless, 10.0, 5.0).unwrap(), 0.0);
        assert!(matches!(
            kinetic_friction_torque(&tool, 10.0, 0.0),
            Err(Error::ZeroSlipRate)
        ));
    }

    #[test]
    fn static_bound_is_product() {
        let tool = reference_tool();
        assert_eq!(static_friction_bound(&tool, 0.0), 0.0);
        assert_relative_eq!(static_friction_bound(&tool, 10.0), 0.2, epsilon = 1e-15);
        let zero = tool.with_friction(0.0, 0.0, 0.1).unwrap();
        assert_eq!(static_friction_bound(&zero, 10.0), 0.0);
    }

    #[test]
    fn required_torque_examples() {
        let tool = reference_tool();
        let flat = horizontal(0.3);
        let rest = PivotState::at_rest(0.0, 0.025);
        assert_eq!(stick_torque_required(&tool, &flat, &rest, 0.0), 0.0);
        // (I + m r² + m l r) · 1 = 0.01 + 0.001 + 0.003
        assert_relative_eq!(stick_torque_required(&tool, &flat, &rest, 1.0), 0.014, max_relative = 1e-12);
        let upright = ArmParams::new(0.3, 9.81, Plane::Vertical).unwrap();
        assert_relative_eq!(stick_torque_required(&tool, &upright, &rest, 0.0), 0.0981, max_relative = 1e-12);
    }

    #[test]
    fn tool_acceleration_examples() {
        let tool = reference_tool();
        let flat = horizontal(0.3);
        let rest = PivotState::at_rest(0.0, 0.025);
        assert_eq!(tool_acceleration(&tool, &flat, &rest, 0.0, 0.0), 0.0);
        assert_relative_eq!(
            tool_acceleration(&tool, &flat, &rest, 1.0, 0.0),
            -0.014 / 0.011,
            max_relative = 1e-12
        );
        let upright = ArmParams::new(0.3, 9.81, Plane::Vertical).unwrap();
        assert_relative_eq!(
            tool_acceleration(&tool, &upright, &rest, 0.0, 0.0),
            -0.0981 / 0.011,
            max_relative = 1e-12
        );
    }

    #[test]
    fn parameter_validation() {
        assert!(ToolParams::new(0.0, 0.01, 0.1, 0.02, 0.01, 0.1).is_err());
        assert!(ToolParams::new(0.1, 0.0, 0.1, 0.02, 0.01, 0.1).is_err());
        assert!(ToolParams::new(0.1, 0.01, -0.1, 0.02, 0.01, 0.1).is_err());
        // static below kinetic
        assert!(ToolParams::new(0.1, 0.01, 0.1, 0.005, 0.01, 0.1).is_err());
        assert!(ToolParams::new(0.1, f64::NAN, 0.1, 0.02, 0.01, 0.1).is_err());
        assert!(GripperParams::new(1000.0, 0.02, 0.02, 0.04, 0.05).is_err());
        assert!(GripperParams::new(1000.0, 0.05, 0.02, 0.04, 0.05).is_err());
        assert!(GripperParams::new(1000.0, 0.03, 0.02, 0.04, 0.0).is_err());
        assert!(ArmParams::new(0.0, 9.81, Plane::Vertical).is_err());
        assert!(ArmParams::new(0.3, -1.0, Plane::Vertical).is_err());
        assert_eq!(horizontal(0.3).effective_gravity(), 0.0);
    }

    #[test]
    fn step_rejects_bad_input() {
        let model = PivotModel::default();
        let s = PivotState::at_rest(0.1, 0.025);
        assert!(model.step(&s, 1.0, 0.0).is_err());
        assert!(model.step(&s, f64::NAN, 1e-3).is_err());
        let mut bad = s;
        bad.tool_angle = f64::INFINITY;
        assert!(model.step(&bad, 0.0, 1e-3).is_err());
    }

    #[test]
    fn hard_grip_keeps_tool_stuck() {
        let model = PivotModel::default();
        let mut s = PivotState::at_rest(0.4, model.gripper.finger_min());
        for i in 0..2000 {
            let a = if (i / 100) % 2 == 0 { 15.0 } else { -15.0 };
            s = model.step(&s, a, 1e-3).unwrap();
            assert_eq!(s.mode, ContactMode::Stuck);
            assert_eq!(s.tool_angle, 0.4);
            assert_eq!(s.tool_rate, 0.0);
        }
    }

    #[test]
    fn open_fingers_free_rotation() {
        let tool = ToolParams::default().with_friction(0.0, 0.0, 0.0).unwrap();
        let model = PivotModel::new(tool, ArmParams::default(), GripperParams::default());
        let mut s = PivotState {
            tool_rate: 1.0,
            mode: ContactMode::Slipping,
            ..PivotState::at_rest(0.0, model.gripper.finger_max())
        };
        for _ in 0..1000 {
            s = model.step(&s, 0.0, 1e-3).unwrap();
        }
        assert_eq!(s.tool_rate, 1.0);
        assert_relative_eq!(s.tool_angle, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn loose_grip_breaks_away_then_resticks() {
        let model = PivotModel::default();
        // Barely touching: small normal force.
        let d = model.gripper.contact_distance() - 0.002;
        let mut s = PivotState::at_rest(0.0, d);
        for _ in 0..50 {
            s = model.step(&s, 20.0, 1e-3).unwrap();
        }
        assert_eq!(s.mode, ContactMode::Slipping);
        assert!(s.tool_rate < 0.0, "tool lags the accelerating gripper");
        // Coast at constant gripper rate; friction brings the tool back to rest.
        let mut stuck_at = None;
        for i in 0..5000 {
            s = model.step(&s, 0.0, 1e-3).unwrap();
            if s.mode == ContactMode::Stuck {
                stuck_at = Some(i);
                break;
            }
        }
        assert!(stuck_at.is_some());
        assert_eq!(s.tool_rate, 0.0);
    }
}
