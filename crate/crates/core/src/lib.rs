//! Numerical laboratory for the infinite Kuramoto model
//!
//! `θ̇_i = ν_i + Σ_j κ_ij sin(θ_j − θ_i)`, `i ∈ ℕ`,
//!
//! built from lazily represented infinite coupling matrices
//! ([`topology`]), certified finite truncations ([`ensemble`]), a
//! deterministic fixed-step integrator ([`dynamics`]), a suite of
//! observables and inequality checks ([`diagnostics`]), and scenario-driven
//! experiments with CSV/JSON output ([`harness`]).

pub mod diagnostics;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod rng;
pub mod summation;
pub mod topology;

pub use error::{Error, Result};
