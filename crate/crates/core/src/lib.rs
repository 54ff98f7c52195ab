//! Solver lab for compressible Navier-Stokes with density-degenerate viscosity
//! and far-field vacuum.

pub mod admissibility;
pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod krylov;
pub mod momentum;
pub mod ops;
pub mod output;
pub mod params;
pub mod picard;
pub mod reform;
pub mod snapshot;
pub mod study;
pub mod transport;

pub use error::{Error, Result};
pub use field::{PrimitiveState, ReformState, ScalarField, TensorField, VectorField};
pub use grid::{Axis, Boundary, Grid};
pub use params::{derive_constants, validate_params, DerivedConstants, Params};
