use crate::graph::WeightedGraph;
use crate::mappings::{composed_sector, SectorMap};
use crate::objective::LocalCost;
use crate::{Error, Result};

/// `node` is applied to gradient differences, `link` to each gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPair {
    pub node: SectorMap,
    pub link: SectorMap,
}

impl MapPair {
    pub fn identity() -> Self {
        Self { node: SectorMap::identity(), link: SectorMap::identity() }
    }

    pub fn is_identity(&self) -> bool {
        self.node.is_identity() && self.link.is_identity()
    }

    /// `(kappa_n * kappa_l, big_k_n * big_k_l)`.
    pub fn composed_sector(&self) -> (f64, f64) {
        composed_sector(&self.node, &self.link)
    }
}

/// Saturation events counted while evaluating the maps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampCounts {
    pub node: u64,
    pub link: u64,
}

impl ClampCounts {
    pub fn total(&self) -> u64 {
        self.node + self.link
    }
}

/// `W * g_n(gl_i - gl_j)`. Odd `g_n` makes this exactly antisymmetric.
pub fn edge_flow(w: f64, gl_i: f64, gl_j: f64, gn: &SectorMap) -> Result<f64> {
    Ok(w * gn.apply(gl_i - gl_j)?)
}

pub(crate) fn diverged(step: u64, agent: usize, detail: impl Into<String>) -> Error {
    Error::Diverged { step, agent, detail: detail.into() }
}

pub(crate) fn check_inputs(x: &[f64], graph: &WeightedGraph, costs: &[LocalCost], eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("step rate must be finite and > 0, got {eta}")));
    }
    if graph.n() != x.len() || costs.len() != x.len() {
        return Err(Error::Config(format!(
            "dimension mismatch: state {}, graph {}, costs {}",
            x.len(),
            graph.n(),
            costs.len()
        )));
    }
    Ok(())
}

/// `g_l(f_i'(x_i))` for every agent.
pub(crate) fn link_gradients(
    x: &[f64],
    costs: &[LocalCost],
    link: &SectorMap,
    step: u64,
    clamps: &mut ClampCounts,
) -> Result<Vec<f64>> {
    x.iter()
        .zip(costs)
        .enumerate()
        .map(|(i, (&xi, c))| {
            let g = c.grad(xi);
            if !g.is_finite() {
                return Err(diverged(step, i, format!("non-finite gradient at x_i = {xi}")));
            }
            link.apply_counted(g, &mut clamps.link).map_err(|e| diverged(step, i, e.to_string()))
        })
        .collect()
}

/// `eta * W_ij * g_n(gl_i - gl_j)` for one link, with the node clamp counted.
pub(crate) fn scaled_flow(
    eta: f64,
    w: f64,
    gl_i: f64,
    gl_j: f64,
    node: &SectorMap,
    step: u64,
    agent: usize,
    clamps: &mut ClampCounts,
) -> Result<f64> {
    let g = node.apply_counted(gl_i - gl_j, &mut clamps.node).map_err(|e| diverged(step, agent, e.to_string()))?;
    Ok(eta * (w * g))
}

pub(crate) fn apply_delta(x: &mut [f64], delta: &[f64], step: u64) -> Result<()> {
    for (i, (xi, d)) in x.iter_mut().zip(delta).enumerate() {
        *xi += d;
        if !xi.is_finite() {
            return Err(diverged(step, i, "non-finite state"));
        }
    }
    Ok(())
}

/// One delay-free step on `graph` (the graph active at step `step`).
pub fn step_delay_free(
    x: &mut [f64],
    graph: &WeightedGraph,
    costs: &[LocalCost],
    maps: &MapPair,
    eta: f64,
    step: u64,
    clamps: &mut ClampCounts,
) -> Result<()> {
    check_inputs(x, graph, costs, eta)?;
    let gl = link_gradients(x, costs, &maps.link, step, clamps)?;
    let mut delta = vec![0.0; x.len()];
    for e in graph.edges() {
        let d = scaled_flow(eta, e.w, gl[e.i], gl[e.j], &maps.node, step, e.i, clamps)?;
        delta[e.i] -= d;
        delta[e.j] += d;
    }
    apply_delta(x, &delta, step)
}
