//! Exact symbolic engine for braided noncommutative differential geometry
//! over triangular Hopf algebras coming from abelian Drinfeld twists.
//!
//! Everything is computed in truncated formal power series in the
//! deformation parameter `h` with Gaussian-rational coefficients, so every
//! identity can be checked with zero tolerance.

#![allow(clippy::needless_range_loop)]

pub mod algebra;
pub mod calculus;
pub mod connections;
pub mod error;
pub mod modules;
pub mod riemann;
pub mod sampling;
pub mod scalars;
pub mod symmetry;

pub use error::{Error, Result};
