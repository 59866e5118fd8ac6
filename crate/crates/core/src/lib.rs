//! Numerical checks of orderly divergence for Gamma stochastic integrals
//! `R_t = int_0^t f dGamma / int_0^t f`.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod gamma;
pub mod integrands;
pub mod montecarlo;
pub mod quad;
pub mod rng;

pub use error::{Error, Result};
