use rand::Rng;

use super::flow::MapPair;
use crate::graph::{laplacian, WeightedGraph};
use crate::numeric::{compensated_sum, mean, norm2};
use crate::objective::{check_dims, gradients, LocalCost};
use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumReport {
    pub spread: f64,
    pub converged: bool,
}

/// `max_i f_i'(x_i) - min_i f_i'(x_i)`.
pub fn gradient_spread(x: &[f64], costs: &[LocalCost]) -> Result<f64> {
    check_dims(costs, x)?;
    let g = gradients(costs, x);
    let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(if g.is_empty() { 0.0 } else { hi - lo })
}

pub fn equilibrium_check(x: &[f64], costs: &[LocalCost], tol: f64) -> Result<EquilibriumReport> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be > 0, got {tol}")));
    }
    let spread = gradient_spread(x, costs)?;
    Ok(EquilibriumReport { spread, converged: spread <= tol })
}

/// `|| grad F - mean(grad F) 1 ||_2`.
pub fn gradient_dispersion(x: &[f64], costs: &[LocalCost]) -> Result<f64> {
    check_dims(costs, x)?;
    let g = gradients(costs, x);
    let m = mean(&g);
    Ok(norm2(&g.iter().map(|v| v - m).collect::<Vec<_>>()))
}

/// Empirical check of the Laplacian-tracking and Rayleigh sector inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorDiagnostics {
    pub samples: usize,
    /// Samples where `grad F^T L grad F = 0` and the ratio is undefined.
    pub degenerate: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub sector: (f64, f64),
    /// Samples with the ratio outside `sector`.
    pub violations: usize,
    /// Largest relative distance of the ratio outside `sector`.
    pub worst_excursion: f64,
    /// Samples outside `lambda2 kappa |xi|^2 <= grad F^T Phi <= lambda_n K |xi|^2`.
    pub rayleigh_violations: usize,
}

impl SectorDiagnostics {
    pub fn violation_rate(&self) -> f64 {
        self.violations as f64 / (self.samples - self.degenerate).max(1) as f64
    }
}

const RATIO_RTOL: f64 = 1e-12;

/// Samples states uniformly in `domain` and compares the nonlinear flow
/// `Phi` against the linear one through `r = grad F^T Phi / grad F^T L grad F`.
pub fn sector_diagnostics(
    graph: &WeightedGraph,
    costs: &[LocalCost],
    maps: &MapPair,
    domain: (f64, f64),
    samples: usize,
    seed: u64,
) -> Result<SectorDiagnostics> {
    if samples == 0 {
        return Err(Error::Config("samples must be >= 1".into()));
    }
    if graph.n() != costs.len() {
        return Err(Error::Config(format!("graph has {} nodes, {} costs", graph.n(), costs.len())));
    }
    if !(domain.0 < domain.1) {
        return Err(Error::Config(format!("empty sampling domain [{},{}]", domain.0, domain.1)));
    }
    let spec = laplacian(graph).spectrum()?;
    let (kappa, big_k) = maps.composed_sector();
    let mut rng = stream(seed, "sector_diagnostics");
    let mut report = SectorDiagnostics {
        samples,
        degenerate: 0,
        ratio_min: f64::INFINITY,
        ratio_max: f64::NEG_INFINITY,
        sector: (kappa, big_k),
        violations: 0,
        worst_excursion: 0.0,
        rayleigh_violations: 0,
    };
    for _ in 0..samples {
        let x: Vec<f64> = (0..graph.n()).map(|_| rng.random_range(domain.0..domain.1)).collect();
        let g = gradients(costs, &x);
        let gl: Vec<f64> = g.iter().map(|&v| maps.link.apply(v)).collect::<Result<_>>()?;
        let mut lin = Vec::with_capacity(graph.edge_count());
        let mut nonlin = Vec::with_capacity(graph.edge_count());
        for e in graph.edges() {
            let d = g[e.i] - g[e.j];
            lin.push(e.w * d * d);
            nonlin.push(e.w * d * maps.node.apply(gl[e.i] - gl[e.j])?);
        }
        let quad = compensated_sum(lin);
        let flow = compensated_sum(nonlin);

        let m = mean(&g);
        let xi2: f64 = g.iter().map(|v| (v - m) * (v - m)).sum();
        let slack = RATIO_RTOL * spec.lambda_n * big_k * xi2;
        if flow < spec.lambda2 * kappa * xi2 - slack || flow > spec.lambda_n * big_k * xi2 + slack {
            report.rayleigh_violations += 1;
        }

        if quad == 0.0 {
            report.degenerate += 1;
            continue;
        }
        let r = flow / quad;
        report.ratio_min = report.ratio_min.min(r);
        report.ratio_max = report.ratio_max.max(r);
        let below = (kappa - r) / kappa;
        let above = (r - big_k) / big_k;
        let excursion = below.max(above);
        if excursion > RATIO_RTOL {
            report.violations += 1;
            report.worst_excursion = report.worst_excursion.max(excursion);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::erdos_renyi;
    use crate::mappings::SectorMap;

    #[test]
    fn spread_and_dispersion_examples() {
        let sq = LocalCost::quadratic(1.0, 0.0, 0.0).unwrap();
        let r = equilibrium_check(&[3.0, 3.0, 3.0], &[sq; 3], 1e-12).unwrap();
        assert_eq!(r.spread, 0.0);
        assert!(r.converged);
        let pair = [sq, LocalCost::quadratic(2.0, 0.0, 0.0).unwrap()];
        assert_eq!(gradient_spread(&[2.0, 1.0], &pair).unwrap(), 0.0);
        // grad F = (2, 0) so xi = (1, -1).
        let d = gradient_dispersion(&[1.0, 0.0], &[sq; 2]).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_maps_track_the_laplacian_exactly() {
        let g = erdos_renyi(15, 0.4, (0.5, 1.0), 2).unwrap();
        let costs: Vec<_> = (0..15).map(|i| LocalCost::quartic(0.01, 0.1 * i as f64).unwrap()).collect();
        let rep = sector_diagnostics(&g, &costs, &MapPair::identity(), (1.0, 10.0), 200, 1).unwrap();
        assert_eq!((rep.ratio_min, rep.ratio_max), (1.0, 1.0));
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.rayleigh_violations, 0);
    }

    #[test]
    fn saturation_inside_linear_region_is_exact() {
        let g = erdos_renyi(10, 0.5, (0.5, 1.0), 2).unwrap();
        let costs = vec![LocalCost::quadratic(0.01, 0.0, 0.0).unwrap(); 10];
        let maps = MapPair { node: SectorMap::saturation(100.0, 200.0).unwrap(), link: SectorMap::identity() };
        let rep = sector_diagnostics(&g, &costs, &maps, (0.0, 5.0), 100, 3).unwrap();
        assert_eq!((rep.ratio_min, rep.ratio_max), (1.0, 1.0));
        assert_eq!(rep.violations, 0);
    }
}
