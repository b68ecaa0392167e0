//! Small function approximators with analytic gradients.

pub mod checkpoint;
pub mod mlp;
pub mod policy;

pub use mlp::{Mlp, Trace, HIDDEN_SIZES};
pub use policy::{ActionDist, GaussianPolicy, ObsNormalizer, ValueNet};
