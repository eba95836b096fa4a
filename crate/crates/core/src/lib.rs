//! Two-population Curie-Weiss model: stochastic Glauber dynamics, the
//! lumped master equation, the mean-field limit and its zero-field phase
//! diagram.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod master;
pub mod mean_field;
pub mod model;
pub mod phase;
pub mod sim;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
pub use model::{LumpedState, MagnetizationPair, ModelParams, Population, PopulationSizes, Spin};
pub use master::{LumpedDistribution, LumpedGenerator};
pub use mean_field::{Jacobian2, OdeConfig, OdeMethod, TwoPoint};
pub use phase::{EquilibriumPoint, PhaseRegion, RegionLabel, Stability};
pub use sim::{EnsembleStats, RecordMode, SimConfig, Trajectory};
pub use validation::{LlnReport, LlnRow};
