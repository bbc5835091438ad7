//! Solver for the generalized trust-region subproblem
//!
//! ```text
//! minimize  xᵀAx + 2aᵀx   subject to  xᵀBx + 2bᵀx + β ≤ 0
//! ```
//!
//! with sparse symmetric `A`, `B` and a known `λ̂` making `A + λ̂B` positive definite.
//! All large-scale work is done with matrix products, conjugate gradient and an
//! iterative generalized eigensolver.

pub mod config;
pub mod error;
pub mod gtrs;
pub mod oracle;
pub mod probgen;
pub mod problem;
pub mod secular;
pub mod sparse;
pub mod vecops;

pub use config::{EigConfig, SecularConfig, SolverConfig};
pub use error::{Error, Result};
pub use gtrs::{solve, Case, GtrsOutcome};
pub use problem::GtrsProblem;
