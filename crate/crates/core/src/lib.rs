//! Simulation library for contextual Gaussian graph matching.
//!
//! Two weighted graphs on `n` nodes carry correlated Gaussian edge weights
//! and `d`-dimensional correlated Gaussian node features; the second graph
//! is relabeled by a hidden uniform permutation. The crate samples such
//! instances, evaluates the posterior Gibbs energy (Hamiltonian) of a
//! candidate alignment, runs optimal and heuristic matchers, and provides
//! Monte Carlo harnesses for recovery phase diagrams and concentration
//! checks.
//!
//! Indices are 0-based throughout.

pub mod assignment;
pub mod combinatorics;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod hamiltonian;
pub mod model;
pub mod partition;
pub mod permutation;
pub mod rng;

pub use error::{Error, Result, ENUMERATION_CAP};
pub use estimators::{MatchResult, SwapCertificate};
pub use hamiltonian::{EnergyTable, HamiltonianBreakdown};
pub use model::{Instance, Matrix, ModelParams, SymMatrix};
pub use partition::LogPartition;
pub use permutation::Permutation;

/// Version string embedded in every output artifact.
pub const TOOL_VERSION: &str = concat!("ctxmatch ", env!("CARGO_PKG_VERSION"));

/// Numerical tolerances shared by the library and its checks.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Agreement between incremental swap updates and full recomputation,
    /// scaled by `1 + |v|`.
    pub delta: f64,
    /// Posterior normalization error.
    pub normalization: f64,
    /// Minimum decrease for local search to accept a swap, scaled by `1 + |v|`.
    pub improvement: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    delta: 1e-9,
    normalization: 1e-8,
    improvement: 1e-12,
};
