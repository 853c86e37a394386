//! Update laws of the allocation dynamics.
//!
//! Every active link `(i, j)` computes one flow
//! `phi_ij = W_ij * g_n(g_l(f_i') - g_l(f_j'))` and moves `eta * phi_ij` from
//! `i` to `j`. Flows are accumulated into a delta vector in edge order and the
//! two endpoints receive the same value with opposite signs, so `sum(x)` is
//! conserved up to per-edge rounding whatever the nonlinearities are.

mod bounds;
mod delayed;
mod diagnostics;
mod flow;
mod init;

pub use bounds::{max_delay_bound, step_rate_bound, BoundInputs, StepRateBound};
pub use delayed::{step_delayed, DelayMode, DelaySchedule, DelayedNetworkState};
pub use diagnostics::{
    equilibrium_check, gradient_dispersion, gradient_spread, sector_diagnostics, EquilibriumReport, SectorDiagnostics,
};
pub use flow::{edge_flow, step_delay_free, ClampCounts, MapPair};
pub use init::{feasible_init, InitMode};

/// Tolerance on `|sum(x) - b|` that every run must respect.
pub fn feasibility_tolerance(b: f64, n: usize) -> f64 {
    1e-9 * (1.0 + b.abs()) * ((n + 1) as f64).log2()
}
