use std::time::{Duration, Instant};

use crate::dynamics::{step_delay_free, ClampCounts, MapPair};
use crate::graph::erdos_renyi;
use crate::objective::LocalCost;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub edges: usize,
    pub steps: u64,
    pub seconds_per_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `ln(seconds_per_step)` against `ln(n)`.
    pub slope: f64,
}

const MIN_SAMPLE: Duration = Duration::from_millis(20);

/// Times delay-free steps on ER(n, density) graphs. The step count doubles
/// until one measurement lasts at least 20 ms, then the best of three runs is kept.
pub fn scaling_benchmark(n_list: &[usize], steps: u64, density: f64, seed: u64) -> Result<BenchTable> {
    if n_list.is_empty() {
        return Err(Error::Config("n_list must be nonempty".into()));
    }
    if steps == 0 {
        return Err(Error::Config("steps must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let g = erdos_renyi(n, density, (0.5, 1.0), seed)?;
        let costs: Vec<LocalCost> =
            (0..n).map(|i| LocalCost::quadratic(1.0 + (i % 7) as f64, 0.0, 0.0)).collect::<Result<_>>()?;
        let maps = MapPair::identity();
        let eta = 0.5 / (8.0 * n as f64);
        let x0: Vec<f64> = (0..n).map(|i| (i % 5) as f64).collect();
        let time = |count: u64| -> Result<Duration> {
            let mut x = x0.clone();
            let mut clamps = ClampCounts::default();
            let start = Instant::now();
            for k in 0..count {
                step_delay_free(&mut x, &g, &costs, &maps, eta, k, &mut clamps)?;
            }
            let elapsed = start.elapsed();
            std::hint::black_box(&x);
            Ok(elapsed)
        };
        let mut count = steps;
        while time(count)? < MIN_SAMPLE && count < (1 << 30) {
            count *= 2;
        }
        let best = (0..3).map(|_| time(count)).collect::<Result<Vec<_>>>()?.into_iter().min().expect("three samples");
        rows.push(BenchRow {
            n,
            edges: g.edge_count(),
            steps: count,
            seconds_per_step: best.as_secs_f64() / count as f64,
        });
    }
    let slope = log_log_slope(&rows);
    Ok(BenchTable { rows, slope })
}

fn log_log_slope(rows: &[BenchRow]) -> f64 {
    if rows.len() < 2 {
        return f64::NAN;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.n as f64).ln(), r.seconds_per_step.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let rows: Vec<BenchRow> = [10usize, 20, 40]
            .iter()
            .map(|&n| BenchRow { n, edges: 0, steps: 1, seconds_per_step: 3e-9 * (n * n) as f64 })
            .collect();
        assert!((log_log_slope(&rows) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_input() {
        assert!(scaling_benchmark(&[], 10, 0.5, 0).is_err());
    }
}
