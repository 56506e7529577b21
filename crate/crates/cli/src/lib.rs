//! Command-line front end for the estimation toolkit: certificate
//! verification and synthesis, horizon analysis, method comparison, and
//! closed-loop simulation with stability monitoring.

pub mod commands;
pub mod formats;
