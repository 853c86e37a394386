//! Bond-percolation thresholds for Erdős-Rényi graphs and union-window
//! connectivity under independent per-step link failures.

use rand::Rng;
use rayon::prelude::*;

use crate::graph::{is_connected, WeightedGraph};
use crate::rng::{substream, SimRng};
use crate::{Error, Result};

/// How the average degree `d_bar` is derived from `(n, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegreeConvention {
    /// `d_bar = (n - 1) p / 2`; reproduces the 79.5% threshold for ER(50, 0.2).
    #[default]
    Halved,
    /// `d_bar = (n - 1) p`, the usual ER mean degree.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PercolationWarning {
    /// `d_bar <= 1`: no giant component for any retention level.
    SubcriticalDegree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercolationProfile {
    pub n: usize,
    pub p_link: f64,
    pub d_bar: f64,
    /// `None` when `d_bar <= 1`.
    pub p_c: Option<f64>,
    pub convention: DegreeConvention,
    pub warning: Option<PercolationWarning>,
}

pub fn er_threshold(n: usize, p: f64) -> Result<PercolationProfile> {
    er_threshold_with(n, p, DegreeConvention::Halved)
}

pub fn er_threshold_with(n: usize, p: f64, convention: DegreeConvention) -> Result<PercolationProfile> {
    if n < 2 {
        return Err(Error::Config(format!("percolation needs n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("link probability must be in (0,1], got {p}")));
    }
    let mean_degree = (n - 1) as f64 * p;
    let d_bar = match convention {
        DegreeConvention::Halved => mean_degree / 2.0,
        DegreeConvention::Standard => mean_degree,
    };
    let (p_c, warning) =
        if d_bar > 1.0 { (Some(1.0 - 1.0 / d_bar), None) } else { (None, Some(PercolationWarning::SubcriticalDegree)) };
    Ok(PercolationProfile { n, p_link: p, d_bar, p_c, convention, warning })
}

/// Probability that a link is absent at every step of a `T + 1` window.
pub fn effective_failure(p_l: f64, window: u32) -> f64 {
    p_l.powi(window as i32 + 1)
}

pub const MAX_WINDOW: u32 = 1_000_000;

/// Smallest `T >= 0` with `p_l^(T+1) < p_c`.
pub fn min_window(p_l: f64, p_c: f64) -> Result<u32> {
    if !(p_c > 0.0 && p_c < 1.0) {
        return Err(Error::Domain(format!("threshold must be in (0,1), got {p_c}")));
    }
    if !(0.0..1.0).contains(&p_l) {
        return Err(Error::Domain(format!("failure probability must be in [0,1), got {p_l}; no finite window exists")));
    }
    (0..=MAX_WINDOW)
        .find(|&t| effective_failure(p_l, t) < p_c)
        .ok_or_else(|| Error::Domain(format!("no window up to {MAX_WINDOW} satisfies p_l^(T+1) < p_c")))
}

/// Two-sided 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilsonInterval {
    pub lo: f64,
    pub hi: f64,
}

const Z95: f64 = 1.959_963_984_540_054;

pub fn wilson_interval(successes: usize, trials: usize) -> WilsonInterval {
    if trials == 0 {
        return WilsonInterval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The endpoints at 0 and n successes are exactly 0 and 1; cancellation would leave residue.
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes >= trials { 1.0 } else { (centre + half).min(1.0) };
    WilsonInterval { lo, hi }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnionConnectivity {
    pub window: u32,
    pub trials: usize,
    pub connected: usize,
    pub fraction: f64,
    pub interval: WilsonInterval,
}

const TRIAL_TAG: &str = "union_connectivity";

/// Survivor union of `window + 1` masks drawn from one trial stream.
fn union_survivors(base: &WeightedGraph, p_l: f64, window: u32, rng: &mut SimRng) -> WeightedGraph {
    let mut alive = vec![false; base.edge_count()];
    for _ in 0..=window {
        for a in alive.iter_mut() {
            let survives = rng.random::<f64>() >= p_l;
            *a |= survives;
        }
    }
    let mut idx = 0;
    base.retain_edges(|_| {
        let keep = alive[idx];
        idx += 1;
        keep
    })
}

/// Fraction of trials whose union over `T + 1` failure masks is connected.
///
/// Trial `t` uses the substream `(seed, t)` and its step-`s` mask is the
/// same for every window length, so the estimate is pathwise nondecreasing in `T`.
pub fn mc_union_connectivity(
    base: &WeightedGraph,
    p_l: f64,
    window: u32,
    trials: usize,
    seed: u64,
) -> Result<UnionConnectivity> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p_l) {
        return Err(Error::Config(format!("failure probability must be in [0,1], got {p_l}")));
    }
    let connected = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = substream(seed, TRIAL_TAG, t as u64);
            is_connected(&union_survivors(base, p_l, window, &mut rng))
        })
        .count();
    Ok(UnionConnectivity {
        window,
        trials,
        connected,
        fraction: connected as f64 / trials as f64,
        interval: wilson_interval(connected, trials),
    })
}
