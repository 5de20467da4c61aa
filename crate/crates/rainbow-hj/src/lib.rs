//! Rainbow option pricing and its first-order-equation counterpart.
//!
//! The library prices European max-of-n call options under correlated
//! geometric Brownian motion three independent ways (closed form for one
//! asset, Monte Carlo for any n, finite differences for n = 1 and 2) and
//! pairs the pricing equation with tools from deterministic optimal control:
//! a Hopf-Lax solver for Hamilton-Jacobi initial-value problems, Legendre
//! transforms, residual checks that a priced surface actually satisfies its
//! equation, and contraction/metric diagnostics in the sup norm.
//!
//! Modules:
//! - [`market`]: validated model inputs (spots, vols, rate, correlation).
//! - [`grid`]: tensor grids, surfaces, interpolation, CSV export.
//! - [`pde`]: closed form, normal CDF, theta scheme, ADI, explicit scheme.
//! - [`montecarlo`]: deterministic counter-based Monte Carlo pricer.
//! - [`hamilton_jacobi`]: Hopf-Lax evaluation, Legendre transform, semigroup
//!   and convexity diagnostics.
//! - [`correspondence`]: equation residuals, sup-norm metric, contraction
//!   checks that connect the two worlds.
//! - [`cli`]: the `rainbow-hj` command-line front end.

// Published coefficient tables (normal CDF, inverse CDF) are kept with the
// digits of the reference implementations, beyond f64 resolution.
#![allow(clippy::excessive_precision)]
// Comparisons of the form `!(x > 0.0)` are deliberate throughout: unlike
// `x <= 0.0`, they classify NaN as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod correspondence;
pub mod grid;
pub mod hamilton_jacobi;
pub mod market;
pub mod montecarlo;
pub mod pde;
