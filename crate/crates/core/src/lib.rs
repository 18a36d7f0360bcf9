//! Numerical laboratory for the Kazdan–Warner equation
//!
//! ```text
//! -Δu + α = S e^{2u/n}
//! ```
//!
//! on flat tori of real dimension `2n`.
//!
//! The crate is organized bottom-up: [`domain`] (grids, fields, masks,
//! cutoffs), [`spectral`] (Fourier operators and the ground-state
//! eigensolver), [`problem`] (residual, energy and its variations),
//! [`solvers`] (Newton, monotone iteration, constrained minimization),
//! [`threshold`] (critical constants by continuation and bisection),
//! [`diagnostics`] (a-priori estimates as executable checks) and [`cli`]
//! (the `kwlab` experiment runner).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod krylov;
pub mod problem;
pub mod solvers;
pub mod spectral;
pub mod threshold;

pub use error::{Error, Result};
