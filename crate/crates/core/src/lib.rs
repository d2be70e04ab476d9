//! Recovery of a harmonic potential on a flat boundary patch from augmented
//! field-magnitude data, and a boundary-integral estimate of the number of
//! poles of a planar potential.
//!
//! The crate is organised bottom-up:
//!
//! * [`potentials`] closed-form harmonic potentials in 3D and 2D with exact
//!   derivatives,
//! * [`trace`] the data `p = |∇u|²`, `q = ∂p/∂x₃` and `σ = sgn ∂u/∂x₃` on the
//!   plane `x₃ = 0`,
//! * [`mesh`] structured P1 triangulations of the unit square,
//! * [`fem`] assembly and damped Newton solution of the quasi-linear trace
//!   equation,
//! * [`source_count`] the pole-count contour integral on circles,
//! * [`harness`] and [`cli`] the convergence study driver.

pub mod cli;
pub mod error;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod potentials;
pub mod quadrature;
pub mod source_count;
pub mod sparse;
pub mod trace;

pub use error::{Error, Result};
