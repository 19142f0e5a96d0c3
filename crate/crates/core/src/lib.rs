//! Open-system simulation of a coherently driven biexciton, optionally
//! coupled to one or two cavity modes.
//!
//! Energies are in units of the exciton decay rate `γ` and expressed as
//! detunings from the laser frequency; times are in units of `1/γ`.

// Negated float comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dressed;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pairstats;
pub mod propagate;
pub mod qspace;
pub mod scenario;
pub mod solver;
pub mod tomography;
pub mod trajectories;

pub use error::{Error, Result};
pub use model::{Cavity, Channel, Drive, LindbladModel, ModelConfig, SensorSpec};
pub use qspace::{CompositeSpace, HilbertFactor, Operator, Polarization};
pub use solver::{DensityMatrix, Superoperator};
