use std::fmt::Write as _;

use rand::Rng;

use super::config::ScenarioConfig;
use crate::dynamics::{
    feasibility_tolerance, feasible_init, gradient_dispersion, gradient_spread, step_delayed, step_rate_bound,
    BoundInputs, DelaySchedule, DelayedNetworkState,
};
use crate::graph::{laplacian, union_graph, WeightedGraph};
use crate::numeric::{compensated_sum, format_float};
use crate::objective::{aggregate_cost, central_solve, smoothness_bound, LocalCost};
use crate::rng::{stream, SimRng};
use crate::{Error, Result};

pub const TRACE_HEADER: &str = "k,residual,feasibility_gap,dispersion,state_min,state_max,state_mean,active_links";

/// Metrics of `x(k)`, the state before step `k` is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: u64,
    pub residual: f64,
    pub feasibility_gap: f64,
    pub dispersion: f64,
    pub state_min: f64,
    pub state_max: f64,
    pub state_mean: f64,
    /// Links active at step `k` after failures.
    pub active_links: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.k,
                format_float(r.residual),
                format_float(r.feasibility_gap),
                format_float(r.dispersion),
                format_float(r.state_min),
                format_float(r.state_max),
                format_float(r.state_mean),
                r.active_links
            )
            .expect("write to string");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub step: u64,
    pub agent: usize,
    pub detail: String,
    /// `eta / eta_bar` when the bound is defined.
    pub eta_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub n: usize,
    pub b: f64,
    pub eta: f64,
    pub seed: u64,
    /// Steps actually applied.
    pub steps: u64,
    pub early_stopped: bool,
    pub divergence: Option<DivergenceReport>,
    pub optimal_cost: f64,
    pub multiplier: f64,
    pub initial_residual: f64,
    pub final_residual: f64,
    /// First `k` with `residual(k) <= 1%` of `residual(0)`.
    pub steps_to_threshold: Option<u64>,
    /// Length `T + tau_bar + 1` of the windows in `decreasing_window_fraction`.
    pub window_length: u64,
    pub decreasing_window_fraction: f64,
    pub max_feasibility_gap: f64,
    pub feasibility_tolerance: f64,
    pub final_spread: f64,
    pub final_dispersion: f64,
    /// Max-norm distance of the final state to the penalized optimum.
    pub oracle_gap: f64,
    /// Max-norm distance between the penalized and exact-box optima, when boxes exist.
    pub exact_box_gap: Option<f64>,
    pub clamp_events_node: u64,
    pub clamp_events_link: u64,
    pub union_lambda2: f64,
    pub union_lambda_n: f64,
    pub smoothness_u: f64,
    /// `None` when the union graph is disconnected.
    pub eta_bar: Option<f64>,
}

impl RunSummary {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn eta_ratio(&self) -> Option<f64> {
        self.eta_bar.map(|e| self.eta / e)
    }

    /// Flat `key=value` block, one entry per line, fixed key order.
    pub fn to_key_values(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), format_float);
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").expect("write to string");
        kv("n", self.n.to_string());
        kv("b", format_float(self.b));
        kv("eta", format_float(self.eta));
        kv("seed", self.seed.to_string());
        kv("steps", self.steps.to_string());
        kv("early_stopped", self.early_stopped.to_string());
        kv("diverged", self.diverged().to_string());
        if let Some(d) = &self.divergence {
            kv("divergence_step", d.step.to_string());
            kv("divergence_agent", d.agent.to_string());
            kv("divergence_detail", d.detail.replace('\n', " "));
            kv("divergence_eta_ratio", opt(d.eta_ratio));
        }
        kv("optimal_cost", format_float(self.optimal_cost));
        kv("multiplier", format_float(self.multiplier));
        kv("initial_residual", format_float(self.initial_residual));
        kv("final_residual", format_float(self.final_residual));
        kv("steps_to_threshold", self.steps_to_threshold.map_or_else(|| "none".into(), |s| s.to_string()));
        kv("window_length", self.window_length.to_string());
        kv("decreasing_window_fraction", format_float(self.decreasing_window_fraction));
        kv("max_feasibility_gap", format_float(self.max_feasibility_gap));
        kv("feasibility_tolerance", format_float(self.feasibility_tolerance));
        kv("final_spread", format_float(self.final_spread));
        kv("final_dispersion", format_float(self.final_dispersion));
        kv("oracle_gap", format_float(self.oracle_gap));
        kv("exact_box_gap", opt(self.exact_box_gap));
        kv("clamp_events_node", self.clamp_events_node.to_string());
        kv("clamp_events_link", self.clamp_events_link.to_string());
        kv("union_lambda2", format_float(self.union_lambda2));
        kv("union_lambda_n", format_float(self.union_lambda_n));
        kv("smoothness_u", format_float(self.smoothness_u));
        kv("eta_bar", opt(self.eta_bar));
        kv("eta_ratio", opt(self.eta_ratio()));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Trace,
    pub summary: RunSummary,
    pub final_state: Vec<f64>,
}

/// Keeps each link independently with probability `1 - p_fail`.
pub fn failure_mask(graph: &WeightedGraph, p_fail: f64, rng: &mut SimRng) -> WeightedGraph {
    if p_fail <= 0.0 {
        return graph.clone();
    }
    graph.retain_edges(|_| rng.random::<f64>() >= p_fail)
}

const SMOOTHNESS_GRID: usize = 1000;
const WINDOW_SLACK: f64 = 1e-12;
const THRESHOLD_FRACTION: f64 = 0.01;
/// A state with some `|x_i| > DIVERGENCE_SCALE * (1 + |b|)` counts as diverged.
/// Beyond this scale the rounding in `sum(x)` alone would exceed the feasibility tolerance.
pub const DIVERGENCE_SCALE: f64 = 1e6;

fn max_norm_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Bound {
    lambda2: f64,
    lambda_n: f64,
    u: f64,
    eta_bar: Option<f64>,
}

fn nominal_bound(
    cfg: &ScenarioConfig,
    slots: &[WeightedGraph],
    costs: &[LocalCost],
    hull: (f64, f64),
) -> Result<Bound> {
    let maps = cfg.maps()?;
    let spec = laplacian(&union_graph(slots)?).spectrum()?;
    let u = smoothness_bound(costs, hull, SMOOTHNESS_GRID)?.u;
    let inputs = BoundInputs::from_spectrum(&spec, &maps, u, cfg.window, cfg.tau_bar);
    let eta_bar = match step_rate_bound(&inputs) {
        Ok(b) => Some(b.eta_bar),
        Err(Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Bound { lambda2: spec.lambda2, lambda_n: spec.lambda_n, u, eta_bar })
}

/// Runs one scenario. Divergence is reported in the summary, not as an error.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let n = cfg.n;
    let costs = cfg.build_costs()?;
    let maps = cfg.maps()?;
    let slots = cfg.build_topologies()?;
    let period = cfg.switch_period();
    let boxes = cfg.boxes()?;

    let oracle_tol = 1e-12 * (1.0 + cfg.b.abs());
    let optimum = central_solve(&costs, cfg.b, None, oracle_tol)?;
    let exact_box_gap = match &boxes {
        Some(bx) => match central_solve(&costs, cfg.b, Some(bx), oracle_tol) {
            Ok(exact) => Some(max_norm_gap(&exact.x, &optimum.x)),
            Err(Error::Infeasible(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };

    let x0 = feasible_init(n, cfg.b, &cfg.init, cfg.seed, boxes.as_deref())?;
    let mut hull =
        x0.iter().chain(&optimum.x).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if let Some(bx) = &boxes {
        for &(lo, hi) in bx {
            hull = (hull.0.min(lo), hull.1.max(hi));
        }
    }
    let bound = nominal_bound(cfg, &slots, &costs, hull)?;

    let mut state = DelayedNetworkState::new(x0, cfg.tau_bar);
    let mut schedule = if cfg.asymmetric_delays {
        state = state.allow_asymmetric();
        DelaySchedule::asymmetric(cfg.tau_bar, cfg.delay_mode, cfg.seed)
    } else {
        DelaySchedule::new(cfg.tau_bar, cfg.delay_mode, cfg.seed)
    };
    let mut fail_rng = stream(cfg.seed, "failures");
    let tol = feasibility_tolerance(cfg.b, n);
    let blow_up = DIVERGENCE_SCALE * (1.0 + cfg.b.abs());

    let mut trace = Trace::default();
    let mut residuals: Vec<f64> = Vec::with_capacity(cfg.horizon as usize + 1);
    let mut max_gap = 0.0_f64;
    let mut divergence = None;
    let mut early_stopped = false;
    let mut steps = 0;

    let record = |k: u64, x: &[f64], residual: f64, gap: f64, active: usize, trace: &mut Trace| -> Result<()> {
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        trace.records.push(TraceRecord {
            k,
            residual,
            feasibility_gap: gap,
            dispersion: gradient_dispersion(x, &costs)?,
            state_min: lo,
            state_max: hi,
            state_mean: compensated_sum(x.iter().copied()) / n as f64,
            active_links: active,
        });
        Ok(())
    };

    for k in 0..=cfg.horizon {
        let x = state.x();
        let residual = aggregate_cost(&costs, x)? - optimum.value;
        let gap = (compensated_sum(x.iter().copied()) - cfg.b).abs();
        max_gap = max_gap.max(gap);
        residuals.push(residual);

        let stop = k == cfg.horizon
            || match cfg.early_stop {
                Some(t) => gradient_spread(x, &costs)? <= t,
                None => false,
            };
        if stop {
            early_stopped = k < cfg.horizon;
            let active = slots[((k / period) % slots.len() as u64) as usize].edge_count();
            record(k, x, residual, gap, active, &mut trace)?;
            break;
        }

        let nominal = &slots[((k / period) % slots.len() as u64) as usize];
        let graph = failure_mask(nominal, cfg.p_fail, &mut fail_rng);
        if k % cfg.stride == 0 {
            record(k, x, residual, gap, graph.edge_count(), &mut trace)?;
        }
        let outcome =
            step_delayed(&mut state, &graph, &mut schedule, &costs, &maps, cfg.eta).and_then(|()| {
                match state.x().iter().position(|v| v.abs() > blow_up) {
                    Some(agent) => Err(Error::Diverged {
                        step: k,
                        agent,
                        detail: format!("state magnitude exceeds {}", format_float(blow_up)),
                    }),
                    None => Ok(()),
                }
            });
        match outcome {
            Ok(()) => steps += 1,
            Err(Error::Diverged { step, agent, detail }) => {
                divergence =
                    Some(DivergenceReport { step, agent, detail, eta_ratio: bound.eta_bar.map(|e| cfg.eta / e) });
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let x = state.x();
    let initial_residual = residuals[0];
    let final_residual = *residuals.last().expect("at least one residual");
    let threshold = THRESHOLD_FRACTION * initial_residual;
    let steps_to_threshold = residuals.iter().position(|&r| r <= threshold).map(|k| k as u64);
    let window_length = u64::from(cfg.window) + u64::from(cfg.tau_bar) + 1;
    let decreasing_window_fraction = window_fraction(&residuals, window_length as usize);
    let finite = x.iter().all(|v| v.is_finite());
    let summary = RunSummary {
        n,
        b: cfg.b,
        eta: cfg.eta,
        seed: cfg.seed,
        steps,
        early_stopped,
        divergence,
        optimal_cost: optimum.value,
        multiplier: optimum.multiplier,
        initial_residual,
        final_residual,
        steps_to_threshold,
        window_length,
        decreasing_window_fraction,
        max_feasibility_gap: max_gap,
        feasibility_tolerance: tol,
        final_spread: if finite { gradient_spread(x, &costs)? } else { f64::NAN },
        final_dispersion: if finite { gradient_dispersion(x, &costs)? } else { f64::NAN },
        oracle_gap: max_norm_gap(x, &optimum.x),
        exact_box_gap,
        clamp_events_node: state.clamps().node,
        clamp_events_link: state.clamps().link,
        union_lambda2: bound.lambda2,
        union_lambda_n: bound.lambda_n,
        smoothness_u: bound.u,
        eta_bar: bound.eta_bar,
    };
    Ok(RunOutput { trace, summary, final_state: x.to_vec() })
}

/// Fraction of `k` with `F(k + len) <= F(k) + slack`; 1 when no full window fits.
fn window_fraction(residuals: &[f64], len: usize) -> f64 {
    if residuals.len() <= len {
        return 1.0;
    }
    let total = residuals.len() - len;
    let ok = (0..total).filter(|&k| residuals[k + len] <= residuals[k] + WINDOW_SLACK).count();
    ok as f64 / total as f64
}
