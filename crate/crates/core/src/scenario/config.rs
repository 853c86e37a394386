use rand::Rng;

use crate::dynamics::{DelayMode, InitMode, MapPair};
use crate::graph::{erdos_renyi_from, is_connected, WeightedGraph};
use crate::mappings::{MapKind, SectorMap};
use crate::objective::{BoxPenalty, CostRow, LocalCost, Penalty, SmoothLogPenalty};
use crate::rng::{stream, substream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    /// One static ER graph.
    Er { p: f64 },
    /// ER graphs, one per probability, visited in order for `period` steps each.
    Cycle { ps: Vec<f64>, period: u64 },
    /// A fixed graph; `source` names where it came from.
    EdgeList { source: String, graph: WeightedGraph },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostSpec {
    /// `omega_i` uniform on `(0, omega_max]`, `alpha_i` uniform on `(0, alpha_max]`.
    Quartic { omega_max: f64, alpha_max: f64 },
    /// `a_i`, `b_i` uniform on the given ranges (a point range means identical agents).
    Quadratic { a: (f64, f64), b: (f64, f64), c: f64 },
    /// Explicit per-agent rows. Row boxes override the penalty box.
    Table { source: String, rows: Vec<CostRow> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltySpec {
    None,
    Box { sigma: f64, exponent: u32, lo: f64, hi: f64 },
    SmoothLog { mu: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub b: f64,
    pub topology: TopologySpec,
    pub weight_range: (f64, f64),
    /// Redraw random topologies until connected (static ER only).
    pub require_connected: bool,
    pub costs: CostSpec,
    pub penalty: PenaltySpec,
    pub node_map: MapKind,
    pub link_map: MapKind,
    pub eta: f64,
    pub horizon: u64,
    pub p_fail: f64,
    pub tau_bar: u32,
    pub delay_mode: DelayMode,
    pub asymmetric_delays: bool,
    pub init: InitMode,
    pub seed: u64,
    pub stride: u64,
    /// Stop once the gradient spread falls to this level.
    pub early_stop: Option<f64>,
    /// Union-window length `T`: connectivity is assumed over `T + 1` steps.
    pub window: u32,
}

pub const DEFAULT_EARLY_STOP: f64 = 1e-8;
const MAX_CONNECT_ATTEMPTS: u64 = 10_000;

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 50,
            b: 200.0,
            topology: TopologySpec::Er { p: 0.2 },
            weight_range: crate::graph::DEFAULT_WEIGHT_RANGE,
            require_connected: false,
            costs: CostSpec::Quartic { omega_max: 0.02, alpha_max: 2.0 },
            penalty: PenaltySpec::None,
            node_map: MapKind::Identity,
            link_map: MapKind::Identity,
            eta: 0.1,
            horizon: 3000,
            p_fail: 0.0,
            tau_bar: 0,
            delay_mode: DelayMode::Uniform,
            asymmetric_delays: false,
            init: InitMode::Equal,
            seed: 0,
            stride: 1,
            early_stop: Some(DEFAULT_EARLY_STOP),
            window: 0,
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    check(p > 0.0 && p <= 1.0, || format!("{what} must be in (0,1], got {p}"))
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.n >= 2, || format!("n must be >= 2, got {}", self.n))?;
        check(self.b.is_finite(), || format!("b must be finite, got {}", self.b))?;
        check(self.eta > 0.0 && self.eta.is_finite(), || format!("eta must be > 0, got {}", self.eta))?;
        check(self.horizon >= 1, || "horizon must be >= 1".into())?;
        check((0.0..=1.0).contains(&self.p_fail), || format!("p_fail must be in [0,1], got {}", self.p_fail))?;
        check(self.stride >= 1, || "stride must be >= 1".into())?;
        let (lo, hi) = self.weight_range;
        check(lo > 0.0 && lo <= hi && hi.is_finite(), || format!("invalid weight range [{lo},{hi}]"))?;
        if let Some(tol) = self.early_stop {
            check(tol > 0.0, || format!("early-stop tolerance must be > 0, got {tol}"))?;
        }
        match &self.topology {
            TopologySpec::Er { p } => check_prob(*p, "topology.p")?,
            TopologySpec::Cycle { ps, period } => {
                check(!ps.is_empty(), || "topology cycle needs at least one probability".into())?;
                check(*period >= 1, || "switch period must be >= 1".into())?;
                for &p in ps {
                    check_prob(p, "topology cycle probability")?;
                }
            }
            TopologySpec::EdgeList { graph, .. } => {
                check(graph.n() == self.n, || format!("edge list has {} nodes, n = {}", graph.n(), self.n))?;
            }
        }
        if let CostSpec::Table { rows, .. } = &self.costs {
            check(rows.len() == self.n, || format!("cost table has {} rows, n = {}", rows.len(), self.n))?;
        }
        if let CostSpec::Quadratic { a, b, .. } = &self.costs {
            check(a.0 > 0.0 && a.0 <= a.1, || format!("quadratic a range [{},{}] invalid", a.0, a.1))?;
            check(b.0 <= b.1, || format!("quadratic b range [{},{}] invalid", b.0, b.1))?;
        }
        if let CostSpec::Quartic { omega_max, alpha_max } = &self.costs {
            check(*omega_max > 0.0, || format!("omega_max must be > 0, got {omega_max}"))?;
            check(*alpha_max > 0.0, || format!("alpha_max must be > 0, got {alpha_max}"))?;
        }
        self.maps()?;
        self.build_costs()?;
        Ok(())
    }

    pub fn maps(&self) -> Result<MapPair> {
        Ok(MapPair { node: SectorMap::new(self.node_map)?, link: SectorMap::new(self.link_map)? })
    }

    /// Per-agent costs, drawn from the `costs` stream.
    pub fn build_costs(&self) -> Result<Vec<LocalCost>> {
        let mut rng = stream(self.seed, "costs");
        fn uniform(rng: &mut crate::rng::SimRng, lo: f64, hi: f64) -> f64 {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        }
        let rows: Vec<CostRow> = match &self.costs {
            CostSpec::Quartic { omega_max, alpha_max } => (0..self.n)
                .map(|_| {
                    // 1 - U with U in [0, 1) lies in (0, 1].
                    let omega = omega_max * (1.0 - rng.random::<f64>());
                    let alpha = alpha_max * (1.0 - rng.random::<f64>());
                    CostRow { base: crate::objective::BaseCost::Quartic { omega, alpha }, bounds: None }
                })
                .collect(),
            CostSpec::Quadratic { a, b, c } => (0..self.n)
                .map(|_| {
                    let a = uniform(&mut rng, a.0, a.1);
                    let b = uniform(&mut rng, b.0, b.1);
                    CostRow { base: crate::objective::BaseCost::Quadratic { a, b, c: *c }, bounds: None }
                })
                .collect(),
            CostSpec::Table { rows, .. } => rows.clone(),
        };
        rows.into_iter()
            .map(|row| {
                let cost = LocalCost { base: row.base, penalty: None };
                match self.penalty {
                    PenaltySpec::None => cost.validated(),
                    PenaltySpec::Box { sigma, exponent, lo, hi } => {
                        let (lo, hi) = row.bounds.unwrap_or((lo, hi));
                        cost.with_penalty(Penalty::Box(BoxPenalty { sigma, exponent, lo, hi }))
                    }
                    PenaltySpec::SmoothLog { mu, lo, hi } => {
                        let (lo, hi) = row.bounds.unwrap_or((lo, hi));
                        cost.with_penalty(Penalty::SmoothLog(SmoothLogPenalty { mu, lo, hi }))
                    }
                }
            })
            .collect()
    }

    /// Topologies in cycling order: one graph for static specs.
    pub fn build_topologies(&self) -> Result<Vec<WeightedGraph>> {
        match &self.topology {
            TopologySpec::EdgeList { graph, .. } => Ok(vec![graph.clone()]),
            TopologySpec::Er { p } => {
                for attempt in 0..MAX_CONNECT_ATTEMPTS {
                    let mut rng = substream(self.seed, "topology/0", attempt);
                    let g = erdos_renyi_from(self.n, *p, self.weight_range, &mut rng)?;
                    if !self.require_connected || is_connected(&g) {
                        return Ok(vec![g]);
                    }
                }
                Err(Error::Config(format!(
                    "no connected ER({}, {p}) draw within {MAX_CONNECT_ATTEMPTS} attempts",
                    self.n
                )))
            }
            TopologySpec::Cycle { ps, .. } => ps
                .iter()
                .enumerate()
                .map(|(slot, &p)| {
                    let mut rng = substream(self.seed, &format!("topology/{slot}"), 0);
                    erdos_renyi_from(self.n, p, self.weight_range, &mut rng)
                })
                .collect(),
        }
    }

    pub fn switch_period(&self) -> u64 {
        match &self.topology {
            TopologySpec::Cycle { period, .. } => *period,
            _ => 1,
        }
    }

    /// Boxes carried by the penalty, if any.
    pub fn boxes(&self) -> Result<Option<Vec<(f64, f64)>>> {
        if self.penalty == PenaltySpec::None {
            return Ok(None);
        }
        Ok(crate::objective::penalty_boxes(&self.build_costs()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn range_errors() {
        let bad = [
            ScenarioConfig { eta: 0.0, ..Default::default() },
            ScenarioConfig { horizon: 0, ..Default::default() },
            ScenarioConfig { p_fail: 1.5, ..Default::default() },
            ScenarioConfig { topology: TopologySpec::Cycle { ps: vec![0.2], period: 0 }, ..Default::default() },
            ScenarioConfig { topology: TopologySpec::Er { p: 0.0 }, ..Default::default() },
            ScenarioConfig { costs: CostSpec::Quartic { omega_max: 0.0, alpha_max: 1.0 }, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn cost_draws_respect_ranges_and_seed() {
        let cfg = ScenarioConfig { seed: 3, ..Default::default() };
        let costs = cfg.build_costs().unwrap();
        assert_eq!(costs, cfg.build_costs().unwrap());
        for c in &costs {
            match c.base {
                crate::objective::BaseCost::Quartic { omega, alpha } => {
                    assert!(omega > 0.0 && omega <= 0.02);
                    assert!(alpha > 0.0 && alpha <= 2.0);
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn connected_redraw() {
        let cfg = ScenarioConfig { n: 10, require_connected: true, ..Default::default() };
        let g = cfg.build_topologies().unwrap();
        assert!(is_connected(&g[0]));
    }
}
