//! Helmholtz-Hodge decomposition on uniform grids, generalized Hamilton-Jacobi
//! residuals for momentum fields with vorticity, and Klein-Gordon/Madelung
//! diagnostics.

pub mod classical;
pub mod commands;
pub mod error;
pub mod grid;
pub mod helmholtz;
pub mod io;
pub mod kg;
pub mod ops;
pub mod poisson;
pub mod report;

pub use error::{Error, Result};
pub use grid::{Axis, BoundaryField, Grid, ScalarField, Side, VectorField};
pub use poisson::{Method, SolveReport, SolverConfig};
