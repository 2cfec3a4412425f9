//! Numerical toolkit for generalized Campanato spaces.
//!
//! The crate computes dyadic oscillation profiles `osc_{p,N}(f; x0, 2^j)`,
//! the seminorms built from them, the moment projections and mollifier-weighted
//! minimal polynomials behind them, and solves the linear transport equation
//! `∂_t f + v·∇f = g` by characteristics. The [`harness`] module checks the
//! a-priori estimates for that equation against these norms.

pub mod campanato;
pub mod dyadic;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
mod lpfit;
pub mod minimal_poly;
pub mod mollify;
pub mod oscillation;
pub mod poly;
pub mod quadrature;
pub mod registry;
pub mod transport;

pub use error::{Error, Result};
pub use lpfit::f_delta;
pub use poly::{basis, BallSpec, MultiIndex, Polynomial};
