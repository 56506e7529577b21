//! State estimation with certified exponential detectability.
//!
//! This crate couples a time-discounted moving horizon estimator (and its
//! full-information sibling) with the incremental detectability certificates
//! that make the estimator provably robustly stable:
//!
//! - [`model`]: the perturbed nonlinear system class `x⁺ = f(x,u,w)`,
//!   `y = h(x,u,w)` with box domains, pointwise linearizations, and the
//!   batch-reactor benchmark instance.
//! - [`certify`]: quadratic detectability certificates `(P, Q, R, η)`,
//!   verified and synthesized through linear matrix inequalities on the
//!   differential dynamics, sampled at box vertices (exact for affine
//!   Jacobians) or on grids (heuristic).
//! - [`estimate`]: the discounted least-squares MHE problem and the
//!   full-information problem with class-K objectives, solved by a projected
//!   single-shooting Levenberg-Marquardt method.
//! - [`analyze`]: the horizon calculus: minimal stabilizing horizon,
//!   contraction-condition comparison across methods, M-step decrease
//!   residuals, and exponential error envelopes.
//! - [`harness`]: seeded closed-loop simulation with per-step monitoring of
//!   every stability inequality.
//!
//! The crate is `no_std` (with `alloc`); all float math goes through `libm`.
//! File formats, serialization, and the command-line front end live in the
//! companion `mhecert` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analyze;
pub mod certify;
pub mod estimate;
pub mod harness;
pub mod linalg;
pub mod model;

mod nlls;
mod sdp;
