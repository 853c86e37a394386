//! Resilient distributed resource allocation (DRA).
//!
//! Agents hold a share `x_i` of a fixed budget `b` and trade along the links of
//! a time-varying weighted graph. Every step each link moves
//! `eta * W_ij * g_n(g_l(f_i'(x_i)) - g_l(f_j'(x_j)))` from one endpoint to the
//! other, so `sum(x) = b` holds at every iteration while the gradients are
//! driven to consensus, which is the optimality condition of
//! `min sum f_i(x_i)  s.t.  sum x_i = b`.
//!
//! Modules:
//!
//! - [`graph`]: weighted undirected graphs, Laplacians, spectra, unions.
//! - [`mappings`]: sector-bounded scalar nonlinearities (quantizers, clipping).
//! - [`objective`]: local costs, penalties, and the centralized optimum oracle.
//! - [`percolation`]: bond-percolation thresholds and union-window sizing.
//! - [`dynamics`]: the delay-free and delayed update laws plus step-rate bounds.
//! - [`scenario`]: scenario assembly, adversity processes, traces, presets.

pub mod dynamics;
pub mod graph;
pub mod mappings;
pub mod numeric;
pub mod objective;
pub mod percolation;
pub mod rng;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters or mismatched inputs.
    #[error("configuration error: {0}")]
    Config(String),

    /// A quantity requested outside the domain where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Constraints that cannot be satisfied simultaneously.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Non-finite values or solver failures.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The iteration produced a non-finite gradient or state.
    #[error("diverged at step {step} (agent {agent}): {detail}")]
    Diverged { step: u64, agent: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
