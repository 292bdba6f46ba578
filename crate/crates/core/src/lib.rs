//! Long-run risk-sensitive portfolio optimization on controlled Markov
//! factor models.
//!
//! The crate computes the optimal growth rate `λ_γ` and a stationary policy
//! by relative value iteration on the logarithmic Bellman operator, measured
//! in weighted span seminorms, and cross-checks the answer by Monte Carlo.
//!
//! Layers, bottom up:
//! - [`grid`], [`norms`], [`entropic`], [`quadrature`]: numerical building blocks;
//! - [`model`]: factor dynamics, action sets and the built-in examples;
//! - [`solver`]: Bellman operators, value iteration, contraction diagnostics;
//! - [`montecarlo`]: trajectory simulation and criterion estimation.

pub mod entropic;
pub mod error;
pub mod grid;
pub mod model;
pub mod montecarlo;
pub mod norms;
pub mod parallel;
pub mod quadrature;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{GridFunction, GridSpec};
pub use parallel::Execution;
