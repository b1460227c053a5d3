//! Concave coverage maximization.
//!
//! The objective: given elements `a` with positive weights `w_a`, cover sets
//! `T_1..T_m`, and a normalized nondecreasing concave counting function `phi`
//! (`phi(0) = 0`, `phi(1) = 1`), pick a feasible family `S` of sets maximizing
//!
//! ```text
//! C(S) = sum_a  w_a * phi(|{i in S : a in T_i}|)
//! ```
//!
//! under a cardinality constraint `|S| = k` or a partition-matroid base
//! constraint. `phi` interpolates between plain coverage (`min(j, 1)`) and an
//! additive objective (`phi(j) = j`); intermediate choices such as `min(j, l)`
//! or harmonic increments cover multi-coverage and committee-selection styles
//! of diminishing returns.
//!
//! The pipeline implemented here:
//!
//! 1. [`relax::build_lp`] / [`relax::solve_lp`]: a linear relaxation whose
//!    optimum dominates the best integral solution.
//! 2. [`round::pipage_round`]: rounds the fractional optimum along
//!    pair-swapping directions, never decreasing the exact multilinear
//!    extension of the objective.
//! 3. [`poisson::concavity_ratio`]: the approximation factor this pipeline
//!    certifies, `alpha_phi = min_x E[phi(Poisson(x))] / phi(x)`, computed to
//!    a requested precision.
//!
//! [`baseline::greedy`] and [`baseline::exact`] provide comparison points at
//! desk scale, and the `phicov` binary exposes everything on the command line.

#![forbid(unsafe_code)]

pub mod baseline;
pub mod cli;
pub mod counting;
pub mod instance;
pub mod poisson;
pub mod relax;
pub mod round;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A family descriptor or key-value string could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Input outside an operation's documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented resource cap would be exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// An instance file violates the schema; `path` names the offending field.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    /// The relaxation has no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A numeric guarantee that should hold by construction failed at runtime.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    /// Partition-system sampling failed verification on every attempt.
    /// `best_deviation` is the smallest maximum deviation any attempt achieved.
    #[error("partition-system verification failed after {attempts} attempts (best max deviation {best_deviation})")]
    Verification { attempts: usize, best_deviation: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
