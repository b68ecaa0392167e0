//! Simulation and training for in-gripper tool pivoting.
//!
//! A gripper on a single rotating link holds a tool at a frictional pivot.
//! The tool has no motor: it can only be turned by accelerating the arm while
//! modulating grip force. This crate provides
//!
//! * [`dynamics`]: the two-link model with stick-slip friction,
//! * [`actuation`]: delayed, noisy command execution and friction randomization,
//! * [`env`]: the episodic control task,
//! * [`nn`]: Gaussian policy and value networks with analytic gradients,
//! * [`trpo`]: trust-region policy optimization,
//! * [`experiments`]: training, evaluation, friction sweeps and the
//!   idealized-vs-modeled actuation transfer study.

pub mod actuation;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod experiments;
pub mod nn;
pub mod rng;
pub mod trpo;

pub use actuation::{ActuationConfig, Actuator, FingerDir};
pub use dynamics::{ArmParams, ContactMode, GripperParams, PivotModel, PivotState, Plane, ToolParams};
pub use env::{Action, EnvConfig, Observation, PivotEnv, TaskConfig};
pub use error::{Error, Result};
pub use experiments::ExperimentConfig;
pub use nn::{GaussianPolicy, Mlp, ValueNet};
pub use trpo::{RolloutBatch, Trainer, TrpoConfig};
