//! Balanced truncation for linear time-invariant systems with respect to
//! conformal images of the left half-plane.

pub mod analysis;
pub mod balancing;
pub mod benchmarks;
pub mod cli;
pub mod error;
pub mod gramians;
pub mod io;
pub mod linalg;
pub mod maps;
pub mod quadrature;
pub mod sim;
pub mod system;

pub use error::{Error, ErrorClass, Result};
pub use linalg::{CMat, CVec, C64};
pub use maps::{ConformalMap, JoukowskiMap, MobiusMap};
pub use system::LtiSystem;
