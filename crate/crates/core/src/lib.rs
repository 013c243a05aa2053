//! Quadratic measure eigenmodes.
//!
//! Any measure that is quadratic in an optical field (transmitted power,
//! spot size, local energy, local helicity, optical force) becomes a
//! Hermitian matrix once the field is written as a superposition of basis
//! beams. Extremal eigenvectors of that matrix, or of a constrained pair of
//! matrices, are the optimal superpositions.

pub mod analysis;
pub mod basis;
pub mod beams;
pub mod cli;
pub mod config;
pub mod bench;
pub mod eigen;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod operators;
pub mod pipelines;
pub mod propagate;
pub mod raster;
pub mod roi;
pub mod special;

pub use error::{QmeError, Result};
pub use field::{ScalarField, VectorField, C64};
pub use grid::{make_grid, Grid};
