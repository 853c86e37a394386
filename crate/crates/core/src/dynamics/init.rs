use rand::Rng;

use crate::numeric::compensated_sum;
use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// `x_i = b / n`.
    Equal,
    /// Positive shares drawn uniformly from the simplex, scaled by `b`.
    RandomSimplex,
    /// A caller-supplied vector that must already sum to `b`.
    Explicit(Vec<f64>),
}

const REBALANCE_ROUNDS: usize = 200;

/// A starting point with `sum(x) = b`, inside the boxes when given.
///
/// The last free coordinate absorbs `b - sum(rest)` so the sum is exact up to
/// one rounding.
pub fn feasible_init(n: usize, b: f64, mode: &InitMode, seed: u64, boxes: Option<&[(f64, f64)]>) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Config("feasible_init needs n >= 1".into()));
    }
    if !b.is_finite() {
        return Err(Error::Config(format!("demand must be finite, got {b}")));
    }
    let mut x = match mode {
        InitMode::Equal => vec![b / n as f64; n],
        InitMode::RandomSimplex => {
            let mut rng = stream(seed, "init");
            // Normalized exponentials are uniform on the simplex.
            let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() + f64::MIN_POSITIVE).collect();
            let total = compensated_sum(e.iter().copied());
            e.iter().map(|v| b * v / total).collect()
        }
        InitMode::Explicit(v) => {
            if v.len() != n {
                return Err(Error::Config(format!("explicit start has {} entries, expected {n}", v.len())));
            }
            let s = compensated_sum(v.iter().copied());
            if (s - b).abs() > 1e-9 * (1.0 + b.abs()) {
                return Err(Error::Infeasible(format!("explicit start sums to {s}, expected {b}")));
            }
            v.clone()
        }
    };
    match boxes {
        None => {
            absorb_residual(&mut x, b, n - 1);
            Ok(x)
        }
        Some(bx) => {
            rebalance_into_boxes(&mut x, b, bx)?;
            Ok(x)
        }
    }
}

fn absorb_residual(x: &mut [f64], b: f64, idx: usize) {
    let rest = compensated_sum(x.iter().enumerate().filter(|&(i, _)| i != idx).map(|(_, &v)| v));
    x[idx] = b - rest;
}

fn rebalance_into_boxes(x: &mut [f64], b: f64, boxes: &[(f64, f64)]) -> Result<()> {
    if boxes.len() != x.len() {
        return Err(Error::Config(format!("{} boxes for {} agents", boxes.len(), x.len())));
    }
    if boxes.iter().any(|&(lo, hi)| !(lo <= hi)) {
        return Err(Error::Config("box with lo > hi".into()));
    }
    let sum_lo = compensated_sum(boxes.iter().map(|b| b.0));
    let sum_hi = compensated_sum(boxes.iter().map(|b| b.1));
    if sum_lo > b || sum_hi < b {
        return Err(Error::Infeasible(format!("demand {b} outside box sum range [{sum_lo},{sum_hi}]")));
    }
    for (xi, &(lo, hi)) in x.iter_mut().zip(boxes) {
        *xi = xi.clamp(lo, hi);
    }
    let tol = 1e-12 * (1.0 + b.abs());
    for _ in 0..REBALANCE_ROUNDS {
        let gap = b - compensated_sum(x.iter().copied());
        if gap.abs() <= tol {
            break;
        }
        let free: Vec<usize> =
            (0..x.len()).filter(|&i| if gap > 0.0 { x[i] < boxes[i].1 } else { x[i] > boxes[i].0 }).collect();
        let share = gap / free.len() as f64;
        for i in free {
            x[i] = (x[i] + share).clamp(boxes[i].0, boxes[i].1);
        }
    }
    // The agent with the most two-sided slack absorbs the final rounding.
    let idx = (0..x.len())
        .max_by(|&a, &c| {
            let slack = |i: usize| (x[i] - boxes[i].0).min(boxes[i].1 - x[i]);
            slack(a).total_cmp(&slack(c))
        })
        .expect("nonempty");
    absorb_residual(x, b, idx);
    let (lo, hi) = boxes[idx];
    let scale = 1e-9 * (1.0 + b.abs());
    if x[idx] < lo - scale || x[idx] > hi + scale {
        return Err(Error::Infeasible("could not rebalance the start into the boxes".into()));
    }
    x[idx] = x[idx].clamp(lo, hi);
    Ok(())
}
