//! Two-dimensional Stokes flow through porous channels by a first-kind
//! single-layer boundary integral equation, with FMM-accelerated GMRES and
//! block-diagonal or inverse-FMM preconditioning.

extern crate blas_src;

pub mod chebyshev;
pub mod error;
pub mod field;
pub mod geometry;
pub mod ifmm;
pub mod kernel;
pub mod operator;
pub mod presets;
pub mod quadrature;
pub mod solver;
pub mod tree;

pub use error::{Error, Result};
