//! Subordinacy diagnostics for extended CMV matrices.
//!
//! Builds CMV truncations from Verblunsky coefficients, propagates the
//! Szegő and GZ recursions, evaluates half-line and whole-line
//! Carathéodory functions and classifies spectral type on a grid of the
//! unit circle.

pub mod classify;
pub mod coeffs;
pub mod error;
pub mod mat2;
pub mod mfun;
pub mod operator;
pub mod recursion;
pub mod selftest;
pub mod subnorm;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
