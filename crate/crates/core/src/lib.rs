//! Numerical laboratory for the Abraham model: a rigid, radially symmetric
//! charge coupled to the Maxwell field.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod fit;
pub mod grid;
pub mod profile;
pub mod propagator;
pub mod quadrature;
pub mod ridge;
pub mod scenario;
pub mod soliton;
pub mod taylor;
pub mod trajectory;

pub use error::{Error, Result};
pub use profile::{ChargeProfile, PhysicalConstants, ProfileShape};
