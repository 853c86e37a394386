use std::collections::HashMap;

use rand::Rng;

use super::flow::{apply_delta, check_inputs, link_gradients, scaled_flow, ClampCounts, MapPair};
use crate::graph::WeightedGraph;
use crate::objective::LocalCost;
use crate::rng::{stream, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayMode {
    /// Fresh draw from `{0, ..., tau_bar}` for every emission.
    #[default]
    Uniform,
    /// Every emission is delayed by exactly `tau_bar`.
    Fixed,
    /// One draw per link, reused for the whole run.
    PerLinkConstant,
}

/// Source of per-link, per-emission delays bounded by `tau_bar`.
#[derive(Debug, Clone)]
pub struct DelaySchedule {
    tau_bar: u32,
    mode: DelayMode,
    symmetric: bool,
    rng: SimRng,
    per_link: HashMap<(usize, usize), (u32, u32)>,
}

pub const DELAY_STREAM: &str = "delays";

impl DelaySchedule {
    /// Symmetric delays: both endpoints receive a flow at the same step.
    pub fn new(tau_bar: u32, mode: DelayMode, seed: u64) -> Self {
        Self { tau_bar, mode, symmetric: true, rng: stream(seed, DELAY_STREAM), per_link: HashMap::new() }
    }

    /// Independent delays per direction. Breaks conservation while flows are in flight.
    pub fn asymmetric(tau_bar: u32, mode: DelayMode, seed: u64) -> Self {
        Self { symmetric: false, ..Self::new(tau_bar, mode, seed) }
    }

    pub fn none() -> Self {
        Self::new(0, DelayMode::Fixed, 0)
    }

    pub fn tau_bar(&self) -> u32 {
        self.tau_bar
    }

    pub fn mode(&self) -> DelayMode {
        self.mode
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    fn draw(&mut self) -> u32 {
        if self.tau_bar == 0 {
            0
        } else {
            self.rng.random_range(0..=self.tau_bar)
        }
    }

    fn draw_pair(&mut self) -> (u32, u32) {
        let a = self.draw();
        let b = if self.symmetric { a } else { self.draw() };
        (a, b)
    }

    /// `(tau_ij, tau_ji)` for an emission on link `(i, j)`.
    pub fn sample(&mut self, i: usize, j: usize) -> (u32, u32) {
        match self.mode {
            DelayMode::Fixed => (self.tau_bar, self.tau_bar),
            DelayMode::Uniform => self.draw_pair(),
            DelayMode::PerLinkConstant => {
                if let Some(&d) = self.per_link.get(&(i, j)) {
                    return d;
                }
                let d = self.draw_pair();
                self.per_link.insert((i, j), d);
                d
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Recipient {
    Both,
    Source,
    Target,
}

/// A flow `eta * phi_ij` in transit; `i` loses it and `j` gains it.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Message {
    i: usize,
    j: usize,
    amount: f64,
    to: Recipient,
}

/// Agent states plus the in-flight flows and gradient history of a delayed run.
#[derive(Debug, Clone)]
pub struct DelayedNetworkState {
    x: Vec<f64>,
    k: u64,
    tau_bar: u32,
    strict: bool,
    /// Slot `s mod (tau_bar + 1)` holds `g_l(f'(x(s)))`.
    history: Vec<Vec<f64>>,
    /// Slot `s mod (tau_bar + 1)` holds flows arriving at step `s`, oldest emission first.
    pending: Vec<Vec<Message>>,
    clamps: ClampCounts,
}

impl DelayedNetworkState {
    pub fn new(x0: Vec<f64>, tau_bar: u32) -> Self {
        let depth = tau_bar as usize + 1;
        Self {
            x: x0,
            k: 0,
            tau_bar,
            strict: true,
            history: vec![Vec::new(); depth],
            pending: vec![Vec::new(); depth],
            clamps: ClampCounts::default(),
        }
    }

    /// Permits asymmetric schedules, giving up all-time feasibility.
    pub fn allow_asymmetric(mut self) -> Self {
        self.strict = false;
        self
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn step(&self) -> u64 {
        self.k
    }

    pub fn tau_bar(&self) -> u32 {
        self.tau_bar
    }

    pub fn clamps(&self) -> ClampCounts {
        self.clamps
    }

    pub fn in_flight(&self) -> usize {
        self.pending.iter().map(Vec::len).sum()
    }

    /// `g_l(f'(x(k - 1 - r)))` for the last completed step `k - 1`, `r <= tau_bar`.
    /// Steps before 0 report the step-0 value.
    pub fn gradient_history(&self, r: u32) -> Option<&[f64]> {
        if self.k == 0 || r > self.tau_bar {
            return None;
        }
        let s = (self.k - 1).saturating_sub(u64::from(r));
        Some(&self.history[self.slot(s)])
    }

    fn slot(&self, s: u64) -> usize {
        (s % (u64::from(self.tau_bar) + 1)) as usize
    }
}

/// One delayed step. `graph` is the topology active at this step after failures.
///
/// Each active link emits a flow from the current gradients. The flow is
/// delivered `tau` steps later. Deliveries due now are applied in emission
/// order. With `tau_bar = 0` this is bitwise identical to [`super::step_delay_free`].
pub fn step_delayed(
    state: &mut DelayedNetworkState,
    graph: &WeightedGraph,
    schedule: &mut DelaySchedule,
    costs: &[LocalCost],
    maps: &MapPair,
    eta: f64,
) -> Result<()> {
    check_inputs(&state.x, graph, costs, eta)?;
    if schedule.tau_bar != state.tau_bar {
        return Err(Error::Config(format!(
            "schedule tau_bar {} does not match state history depth {}",
            schedule.tau_bar,
            state.tau_bar + 1
        )));
    }
    if state.strict && !schedule.symmetric {
        return Err(Error::Config(
            "asymmetric delays break feasibility; enable asymmetric mode on the state explicitly".into(),
        ));
    }
    let k = state.k;
    let gl = link_gradients(&state.x, costs, &maps.link, k, &mut state.clamps)?;

    for e in graph.edges() {
        let amount = scaled_flow(eta, e.w, gl[e.i], gl[e.j], &maps.node, k, e.i, &mut state.clamps)?;
        let (tau_ij, tau_ji) = schedule.sample(e.i, e.j);
        if tau_ij == tau_ji {
            let slot = state.slot(k + u64::from(tau_ij));
            state.pending[slot].push(Message { i: e.i, j: e.j, amount, to: Recipient::Both });
        } else {
            let si = state.slot(k + u64::from(tau_ij));
            state.pending[si].push(Message { i: e.i, j: e.j, amount, to: Recipient::Source });
            let sj = state.slot(k + u64::from(tau_ji));
            state.pending[sj].push(Message { i: e.i, j: e.j, amount, to: Recipient::Target });
        }
    }

    let now = state.slot(k);
    let arrivals = std::mem::take(&mut state.pending[now]);
    let mut delta = vec![0.0; state.x.len()];
    for m in &arrivals {
        if m.to != Recipient::Target {
            delta[m.i] -= m.amount;
        }
        if m.to != Recipient::Source {
            delta[m.j] += m.amount;
        }
    }
    // Reuse the bucket's allocation.
    let mut bucket = arrivals;
    bucket.clear();
    state.pending[now] = bucket;

    if k == 0 {
        for slot in state.history.iter_mut() {
            slot.clone_from(&gl);
        }
    } else {
        state.history[now] = gl;
    }
    apply_delta(&mut state.x, &delta, k)?;
    state.k += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::step_delay_free;
    use crate::graph::erdos_renyi;

    fn half_square() -> LocalCost {
        LocalCost::quadratic(0.5, 0.0, 0.0).unwrap()
    }

    #[test]
    fn hand_queue_with_unit_delay() {
        let g = WeightedGraph::complete(2, 1.0);
        let mut s = DelayedNetworkState::new(vec![3.0, 1.0], 1);
        let mut d = DelaySchedule::new(1, DelayMode::Fixed, 0);
        let costs = [half_square(); 2];
        step_delayed(&mut s, &g, &mut d, &costs, &MapPair::identity(), 0.25).unwrap();
        assert_eq!(s.x(), &[3.0, 1.0]);
        step_delayed(&mut s, &g, &mut d, &costs, &MapPair::identity(), 0.25).unwrap();
        assert_eq!(s.x(), &[2.5, 1.5]);
    }

    #[test]
    fn zero_delay_matches_delay_free_bitwise() {
        let g = erdos_renyi(12, 0.4, (0.5, 1.0), 4).unwrap();
        let costs: Vec<_> = (0..12).map(|i| LocalCost::quartic(0.01 + 0.001 * i as f64, 1.0).unwrap()).collect();
        let x0: Vec<f64> = (0..12).map(|i| 1.0 + 0.7 * i as f64).collect();
        let maps = MapPair {
            node: crate::mappings::SectorMap::log_quantizer(1.0 / 1024.0).unwrap(),
            link: crate::mappings::SectorMap::log_quantizer(0.125).unwrap(),
        };
        let mut a = x0.clone();
        let mut ca = ClampCounts::default();
        let mut s = DelayedNetworkState::new(x0, 0);
        let mut d = DelaySchedule::new(0, DelayMode::Uniform, 1);
        for k in 0..200 {
            step_delay_free(&mut a, &g, &costs, &maps, 0.05, k, &mut ca).unwrap();
            step_delayed(&mut s, &g, &mut d, &costs, &maps, 0.05).unwrap();
            assert!(a.iter().zip(s.x()).all(|(p, q)| p.to_bits() == q.to_bits()), "step {k}");
        }
    }

    #[test]
    fn history_keeps_step_zero_for_prehistory() {
        let g = WeightedGraph::complete(2, 1.0);
        let mut s = DelayedNetworkState::new(vec![3.0, 1.0], 2);
        assert!(s.gradient_history(0).is_none());
        let mut d = DelaySchedule::new(2, DelayMode::Uniform, 3);
        step_delayed(&mut s, &g, &mut d, &[half_square(); 2], &MapPair::identity(), 0.25).unwrap();
        assert_eq!(s.gradient_history(0).unwrap(), &[3.0, 1.0]);
        assert_eq!(s.gradient_history(2).unwrap(), &[3.0, 1.0]);
        assert!(s.gradient_history(3).is_none());
    }

    #[test]
    fn asymmetric_requires_opt_in() {
        let g = WeightedGraph::complete(2, 1.0);
        let costs = [half_square(); 2];
        let mut d = DelaySchedule::asymmetric(2, DelayMode::Uniform, 3);
        let mut strict = DelayedNetworkState::new(vec![3.0, 1.0], 2);
        assert!(matches!(
            step_delayed(&mut strict, &g, &mut d, &costs, &MapPair::identity(), 0.25),
            Err(Error::Config(_))
        ));
        let mut loose = DelayedNetworkState::new(vec![3.0, 1.0], 2).allow_asymmetric();
        for _ in 0..10 {
            step_delayed(&mut loose, &g, &mut d, &costs, &MapPair::identity(), 0.25).unwrap();
        }
        let mut wrong_depth = DelayedNetworkState::new(vec![3.0, 1.0], 1);
        let mut d2 = DelaySchedule::new(2, DelayMode::Uniform, 3);
        assert!(step_delayed(&mut wrong_depth, &g, &mut d2, &costs, &MapPair::identity(), 0.25).is_err());
    }

    #[test]
    fn schedules_are_bounded_and_per_link_constant() {
        let mut d = DelaySchedule::new(4, DelayMode::Uniform, 11);
        assert!((0..1000).all(|_| {
            let (a, b) = d.sample(0, 1);
            a == b && a <= 4
        }));
        let mut c = DelaySchedule::asymmetric(4, DelayMode::PerLinkConstant, 11);
        let first = c.sample(2, 5);
        assert!((0..50).all(|_| c.sample(2, 5) == first));
        assert_eq!(DelaySchedule::new(3, DelayMode::Fixed, 0).sample(0, 1), (3, 3));
    }
}
