//! Bifurcation analysis of stationary Vlasov–Maxwell equilibria reduced to a
//! two-component semilinear elliptic system on a rectangle.
//!
//! The pipeline runs bottom-up: [`ansatz`] moments feed the trivial-solution
//! constraints in [`omega`], the 2×2 linearization in [`linearize`] and the PDE
//! residual in [`pde`]; [`spectral`] supplies Dirichlet eigenvalues, [`bifurcate`]
//! locates critical λ, and [`fields`] rebuilds E, B and checks Maxwell's equations.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod bifurcate;
pub mod config;
pub mod error;
pub mod fields;
pub mod grid;
pub mod linalg;
pub mod linearize;
pub mod omega;
pub mod output;
pub mod pde;
pub mod pipeline;
pub mod poly;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits, the textual form used in every output file.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
