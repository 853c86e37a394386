//! Local costs, box penalties, and a centralized optimum oracle.
//!
//! The oracle solves `min sum f_i(x_i) s.t. sum x_i = b` through the KKT
//! condition `f_i'(x_i) = nu` for all `i`: an outer bisection on the shared
//! multiplier `nu`, and an inner monotone bisection per agent. Bisection is
//! used throughout because quartic costs have zero curvature at `x = alpha`.

use std::fmt::Write as _;

use crate::numeric::{compensated_sum, logistic, softplus};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseCost {
    /// `a x^2 + b x + c`
    Quadratic { a: f64, b: f64, c: f64 },
    /// `omega (x - alpha)^4`
    Quartic { omega: f64, alpha: f64 },
}

/// `sigma * (max(0, x - hi)^m + max(0, lo - x)^m)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxPenalty {
    pub sigma: f64,
    pub exponent: u32,
    pub lo: f64,
    pub hi: f64,
}

/// `(1/mu) * (softplus(mu (x - hi)) + softplus(mu (lo - x)))`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothLogPenalty {
    pub mu: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Box(BoxPenalty),
    SmoothLog(SmoothLogPenalty),
}

impl Penalty {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Penalty::Box(p) => (p.lo, p.hi),
            Penalty::SmoothLog(p) => (p.lo, p.hi),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("penalty box [{lo},{hi}] is empty")));
        }
        match *self {
            Penalty::Box(p) if !(p.sigma > 0.0) => {
                Err(Error::Config(format!("penalty sigma must be > 0, got {}", p.sigma)))
            }
            Penalty::Box(p) if p.exponent < 2 => {
                Err(Error::Config(format!("penalty exponent must be >= 2, got {}", p.exponent)))
            }
            Penalty::SmoothLog(p) if !(p.mu > 0.0) => {
                Err(Error::Config(format!("penalty mu must be > 0, got {}", p.mu)))
            }
            _ => Ok(()),
        }
    }

    fn value(&self, x: f64) -> f64 {
        match *self {
            Penalty::Box(p) => {
                let up = (x - p.hi).max(0.0);
                let down = (p.lo - x).max(0.0);
                p.sigma * (up.powi(p.exponent as i32) + down.powi(p.exponent as i32))
            }
            Penalty::SmoothLog(p) => (softplus(p.mu * (x - p.hi)) + softplus(p.mu * (p.lo - x))) / p.mu,
        }
    }

    fn grad(&self, x: f64) -> f64 {
        match *self {
            Penalty::Box(p) => {
                let m = p.exponent as i32;
                let up = (x - p.hi).max(0.0);
                let down = (p.lo - x).max(0.0);
                p.sigma * f64::from(m) * (up.powi(m - 1) - down.powi(m - 1))
            }
            Penalty::SmoothLog(p) => logistic(p.mu * (x - p.hi)) - logistic(p.mu * (p.lo - x)),
        }
    }

    fn curvature(&self, x: f64) -> f64 {
        match *self {
            Penalty::Box(p) => {
                let m = p.exponent as i32;
                let term = |d: f64| if d > 0.0 { d.powi(m - 2) } else { 0.0 };
                p.sigma * f64::from(m * (m - 1)) * (term(x - p.hi) + term(p.lo - x))
            }
            Penalty::SmoothLog(p) => {
                let s = logistic(p.mu * (x - p.hi));
                let t = logistic(p.mu * (p.lo - x));
                p.mu * (s * (1.0 - s) + t * (1.0 - t))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCost {
    pub base: BaseCost,
    pub penalty: Option<Penalty>,
}

impl LocalCost {
    pub fn quadratic(a: f64, b: f64, c: f64) -> Result<Self> {
        Self { base: BaseCost::Quadratic { a, b, c }, penalty: None }.validated()
    }

    pub fn quartic(omega: f64, alpha: f64) -> Result<Self> {
        Self { base: BaseCost::Quartic { omega, alpha }, penalty: None }.validated()
    }

    pub fn with_penalty(self, penalty: Penalty) -> Result<Self> {
        Self { penalty: Some(penalty), ..self }.validated()
    }

    /// Checks strict convexity of the base cost and penalty parameters.
    pub fn validated(self) -> Result<Self> {
        match self.base {
            BaseCost::Quadratic { a, b, c } => {
                if !(a > 0.0) || !b.is_finite() || !c.is_finite() || !a.is_finite() {
                    return Err(Error::Config(format!("quadratic cost needs finite a > 0, got a={a}")));
                }
            }
            BaseCost::Quartic { omega, alpha } => {
                if !(omega > 0.0) || !omega.is_finite() || !alpha.is_finite() {
                    return Err(Error::Config(format!("quartic cost needs finite omega > 0, got omega={omega}")));
                }
            }
        }
        if let Some(p) = &self.penalty {
            p.validate()?;
        }
        Ok(self)
    }

    pub fn base_value(&self, x: f64) -> f64 {
        match self.base {
            BaseCost::Quadratic { a, b, c } => a * x * x + b * x + c,
            BaseCost::Quartic { omega, alpha } => omega * (x - alpha).powi(4),
        }
    }

    pub fn base_grad(&self, x: f64) -> f64 {
        match self.base {
            BaseCost::Quadratic { a, b, .. } => 2.0 * a * x + b,
            BaseCost::Quartic { omega, alpha } => 4.0 * omega * (x - alpha).powi(3),
        }
    }

    pub fn base_curvature(&self, x: f64) -> f64 {
        match self.base {
            BaseCost::Quadratic { a, .. } => 2.0 * a,
            BaseCost::Quartic { omega, alpha } => 12.0 * omega * (x - alpha).powi(2),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.base_value(x) + self.penalty.map_or(0.0, |p| p.value(x))
    }

    pub fn grad(&self, x: f64) -> f64 {
        self.base_grad(x) + self.penalty.map_or(0.0, |p| p.grad(x))
    }

    pub fn curvature(&self, x: f64) -> f64 {
        self.base_curvature(x) + self.penalty.map_or(0.0, |p| p.curvature(x))
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.penalty.map(|p| p.bounds())
    }
}

/// `F(x) = sum f_i(x_i)`, compensated.
pub fn aggregate_cost(costs: &[LocalCost], x: &[f64]) -> Result<f64> {
    check_dims(costs, x)?;
    Ok(compensated_sum(costs.iter().zip(x).map(|(c, &xi)| c.value(xi))))
}

pub fn gradients(costs: &[LocalCost], x: &[f64]) -> Vec<f64> {
    costs.iter().zip(x).map(|(c, &xi)| c.grad(xi)).collect()
}

pub(crate) fn check_dims(costs: &[LocalCost], x: &[f64]) -> Result<()> {
    if costs.len() != x.len() {
        return Err(Error::Config(format!("{} costs for a state of dimension {}", costs.len(), x.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessEstimate {
    /// Half the largest second derivative observed, times a 1.1 safety factor.
    pub u: f64,
    pub domain: (f64, f64),
}

pub const SMOOTHNESS_SAFETY: f64 = 1.1;

/// Estimates `u` with `f_i'' <= 2u` over `domain` on a uniform grid.
pub fn smoothness_bound(costs: &[LocalCost], domain: (f64, f64), grid: usize) -> Result<SmoothnessEstimate> {
    let (lo, hi) = domain;
    if grid < 100 {
        return Err(Error::Config(format!("smoothness grid needs >= 100 points, got {grid}")));
    }
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("smoothness domain [{lo},{hi}] is empty")));
    }
    let mut max_curv = 0.0_f64;
    for c in costs {
        for t in 0..grid {
            let x = lo + (hi - lo) * t as f64 / (grid - 1) as f64;
            let h = c.curvature(x);
            if !h.is_finite() {
                return Err(Error::Numeric(format!("non-finite curvature at x={x}")));
            }
            max_curv = max_curv.max(h);
        }
    }
    Ok(SmoothnessEstimate { u: SMOOTHNESS_SAFETY * max_curv / 2.0, domain })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub multiplier: f64,
}

const MAX_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 300;

/// Solves `f'(x) = target` for a nondecreasing `f'`, to floating-point resolution.
fn invert_monotone<G: Fn(f64) -> f64>(grad: G, target: f64, start: f64) -> Result<f64> {
    let mut lo = start - 1.0;
    let mut hi = start + 1.0;
    let mut step = 1.0;
    let mut doublings = 0;
    while grad(lo) > target {
        step *= 2.0;
        lo = start - step;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !lo.is_finite() {
            return Err(Error::Numeric(format!("cannot bracket root of f' = {target} from below")));
        }
    }
    step = 1.0;
    doublings = 0;
    while grad(hi) < target {
        step *= 2.0;
        hi = start + step;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Numeric(format!("cannot bracket root of f' = {target} from above")));
        }
    }
    Ok(bisect(&grad, target, lo, hi))
}

fn bisect<G: Fn(f64) -> f64>(grad: &G, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = grad(mid);
        if g == target {
            return mid;
        }
        if g < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Centralized optimum of `sum f_i(x_i)` subject to `sum x_i = b`.
///
/// With `boxes = None` the full (penalized) costs are minimized, which is the
/// problem the distributed dynamics solve. With explicit boxes the penalties
/// are dropped and `lo_i <= x_i <= hi_i` is enforced exactly.
pub fn central_solve(costs: &[LocalCost], b: f64, boxes: Option<&[(f64, f64)]>, tol: f64) -> Result<Optimum> {
    if costs.is_empty() {
        return Err(Error::Config("central_solve needs at least one cost".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be > 0, got {tol}")));
    }
    if let Some(bx) = boxes {
        if bx.len() != costs.len() {
            return Err(Error::Config(format!("{} boxes for {} costs", bx.len(), costs.len())));
        }
        if bx.iter().any(|&(lo, hi)| !(lo <= hi)) {
            return Err(Error::Config("box with lo > hi".into()));
        }
        let (sum_lo, sum_hi) = bx.iter().fold((0.0, 0.0), |(a, c), &(lo, hi)| (a + lo, c + hi));
        if b < sum_lo || b > sum_hi {
            return Err(Error::Infeasible(format!("demand {b} outside box sum range [{sum_lo},{sum_hi}]")));
        }
    }
    for c in costs {
        c.validated()?;
    }

    let allocate = |nu: f64| -> Result<Vec<f64>> {
        costs
            .iter()
            .enumerate()
            .map(|(i, c)| match boxes {
                None => invert_monotone(|x| c.grad(x), nu, 0.0),
                Some(bx) => {
                    let (lo, hi) = bx[i];
                    if c.base_grad(lo) >= nu {
                        Ok(lo)
                    } else if c.base_grad(hi) <= nu {
                        Ok(hi)
                    } else {
                        Ok(bisect(&|x| c.base_grad(x), nu, lo, hi))
                    }
                }
            })
            .collect()
    };
    let total = |x: &[f64]| compensated_sum(x.iter().copied());

    let (mut nu_lo, mut nu_hi) = (-1.0_f64, 1.0_f64);
    let mut doublings = 0;
    while total(&allocate(nu_lo)?) > b {
        nu_lo *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Infeasible(format!("cannot bracket the multiplier for demand {b}")));
        }
    }
    doublings = 0;
    while total(&allocate(nu_hi)?) < b {
        nu_hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Infeasible(format!("cannot bracket the multiplier for demand {b}")));
        }
    }

    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for _ in 0..MAX_BISECTIONS {
        let nu = 0.5 * (nu_lo + nu_hi);
        let x = allocate(nu)?;
        let gap = total(&x) - b;
        if best.as_ref().is_none_or(|(_, _, g)| gap.abs() < g.abs()) {
            best = Some((nu, x, gap));
        }
        if gap.abs() <= tol || nu <= nu_lo || nu >= nu_hi {
            break;
        }
        if gap < 0.0 {
            nu_lo = nu;
        } else {
            nu_hi = nu;
        }
    }
    let (nu, x, gap) = best.expect("at least one bisection step");
    if gap.abs() > tol {
        return Err(Error::Numeric(format!("multiplier bisection stalled with residual {gap:e} > {tol:e}")));
    }
    let value = match boxes {
        None => aggregate_cost(costs, &x)?,
        Some(_) => compensated_sum(costs.iter().zip(&x).map(|(c, &xi)| c.base_value(xi))),
    };
    Ok(Optimum { x, value, multiplier: nu })
}

/// Per-agent boxes carried by the penalties, if every cost has one.
pub fn penalty_boxes(costs: &[LocalCost]) -> Option<Vec<(f64, f64)>> {
    costs.iter().map(LocalCost::bounds).collect()
}

/// One row of a per-agent cost table: base cost plus optional box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRow {
    pub base: BaseCost,
    pub bounds: Option<(f64, f64)>,
}

pub const COST_CSV_HEADER: &str = "i,kind,p1,p2,p3,lo,hi";

/// Parses a cost table with header `i,kind,p1,p2,p3,lo,hi`. `kind` is
/// `quadratic` (p1..p3 = a, b, c) or `quartic` (p1 = omega, p2 = alpha, p3
/// ignored). Empty `lo`/`hi` means no box. Rows must list agents `0..n` in order.
pub fn parse_cost_csv(text: &str) -> Result<Vec<CostRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == COST_CSV_HEADER => {}
        _ => return Err(Error::Config(format!("cost table must start with header `{COST_CSV_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (no, line) in lines {
        let no = no + 1;
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 7 {
            return Err(Error::Config(format!("line {no}: expected 7 columns, got {}", cols.len())));
        }
        let num = |k: usize| -> Result<f64> {
            cols[k].parse::<f64>().map_err(|_| Error::Config(format!("line {no}: bad number `{}`", cols[k])))
        };
        let index: usize =
            cols[0].parse().map_err(|_| Error::Config(format!("line {no}: bad agent index `{}`", cols[0])))?;
        if index != rows.len() {
            return Err(Error::Config(format!("line {no}: expected agent {}, got {index}", rows.len())));
        }
        let base = match cols[1] {
            "quadratic" => BaseCost::Quadratic { a: num(2)?, b: num(3)?, c: num(4)? },
            "quartic" => BaseCost::Quartic { omega: num(2)?, alpha: num(3)? },
            other => return Err(Error::Config(format!("line {no}: unknown cost kind `{other}`"))),
        };
        let bounds = match (cols[5].is_empty(), cols[6].is_empty()) {
            (true, true) => None,
            (false, false) => Some((num(5)?, num(6)?)),
            _ => return Err(Error::Config(format!("line {no}: lo and hi must both be set or both empty"))),
        };
        LocalCost { base, penalty: None }.validated().map_err(|e| Error::Config(format!("line {no}: {e}")))?;
        rows.push(CostRow { base, bounds });
    }
    Ok(rows)
}

pub fn write_cost_csv(rows: &[CostRow]) -> String {
    let mut out = format!("{COST_CSV_HEADER}\n");
    for (i, r) in rows.iter().enumerate() {
        let (kind, p1, p2, p3) = match r.base {
            BaseCost::Quadratic { a, b, c } => ("quadratic", a, b, c),
            BaseCost::Quartic { omega, alpha } => ("quartic", omega, alpha, 0.0),
        };
        let (lo, hi) = r.bounds.map_or((String::new(), String::new()), |(l, h)| (l.to_string(), h.to_string()));
        writeln!(out, "{i},{kind},{p1},{p2},{p3},{lo},{hi}").expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box20() -> Penalty {
        Penalty::Box(BoxPenalty { sigma: 20.0, exponent: 2, lo: 1.0, hi: 10.0 })
    }

    #[test]
    fn value_examples() {
        let c = LocalCost::quartic(0.01, 1.0).unwrap().with_penalty(box20()).unwrap();
        assert!((c.value(2.0) - 0.01).abs() < 1e-15);
        assert_eq!(LocalCost::quadratic(1.0, 0.0, 0.0).unwrap().value(3.0), 9.0);
        assert_eq!(box20().value(12.0), 80.0);
    }

    #[test]
    fn gradient_examples() {
        let c = LocalCost::quartic(0.01, 1.0).unwrap();
        assert!((c.grad(2.0) - 0.04).abs() < 1e-15);
        let h = 1e-5;
        let fd = (c.value(2.0 + h) - c.value(2.0 - h)) / (2.0 * h);
        assert!((fd - 0.04).abs() < 1e-9);
        assert_eq!(LocalCost::quadratic(2.0, 1.0, 0.0).unwrap().grad(0.0), 1.0);
        assert_eq!(box20().grad(0.0), -40.0);
    }

    #[test]
    fn smooth_log_penalty_is_stable_and_positive() {
        let p = Penalty::SmoothLog(SmoothLogPenalty { mu: 5.0, lo: 1.0, hi: 10.0 });
        for x in [-1e3, -100.0, 0.0, 5.0, 11.0, 150.0] {
            let v = p.value(x);
            assert!(v.is_finite() && v > 0.0, "x={x} v={v}");
            assert!(p.grad(x).is_finite() && p.curvature(x) >= 0.0);
        }
        // Far outside the box the penalty is ~linear with unit slope.
        assert!((p.value(150.0) - 140.0).abs() < 1e-9);
        assert!((p.grad(150.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_costs() {
        assert!(LocalCost::quadratic(0.0, 1.0, 0.0).is_err());
        assert!(LocalCost::quartic(-1.0, 0.0).is_err());
        let bad = Penalty::Box(BoxPenalty { sigma: 1.0, exponent: 1, lo: 0.0, hi: 1.0 });
        assert!(LocalCost::quartic(1.0, 0.0).unwrap().with_penalty(bad).is_err());
        let bad = Penalty::SmoothLog(SmoothLogPenalty { mu: 1.0, lo: 2.0, hi: 1.0 });
        assert!(LocalCost::quartic(1.0, 0.0).unwrap().with_penalty(bad).is_err());
    }

    #[test]
    fn smoothness_examples() {
        let q = LocalCost::quadratic(1.0, 3.0, 2.0).unwrap();
        let s = smoothness_bound(&[q], (-5.0, 5.0), 100).unwrap();
        assert!((s.u - 1.1).abs() < 1e-12);
        let c = LocalCost::quartic(0.01, 1.0).unwrap().with_penalty(box20()).unwrap();
        let s = smoothness_bound(&[c], (1.0, 10.0), 1000).unwrap();
        assert!((s.u - 5.346).abs() < 1e-9, "{}", s.u);
        assert!(smoothness_bound(&[q], (0.0, 1.0), 10).is_err());
    }

    #[test]
    fn oracle_symmetric_dispatch() {
        let costs = vec![LocalCost::quadratic(0.05, 4.0, 0.0).unwrap(); 10];
        let boxes = vec![(20.0, 110.0); 10];
        let opt = central_solve(&costs, 600.0, Some(&boxes), 1e-10).unwrap();
        assert!(opt.x.iter().all(|&x| (x - 60.0).abs() < 1e-9));
    }

    #[test]
    fn oracle_two_agent_hand_solution() {
        let costs = [LocalCost::quadratic(1.0, 0.0, 0.0).unwrap(), LocalCost::quadratic(2.0, 0.0, 0.0).unwrap()];
        let opt = central_solve(&costs, 3.0, None, 1e-12).unwrap();
        assert!((opt.x[0] - 2.0).abs() < 1e-10 && (opt.x[1] - 1.0).abs() < 1e-10);
        assert!((opt.multiplier - 4.0).abs() < 1e-9);
        assert!((opt.value - 6.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_clamps_to_exact_boxes() {
        let costs = [LocalCost::quadratic(1.0, 0.0, 0.0).unwrap(), LocalCost::quadratic(1.0, 0.0, 0.0).unwrap()];
        let opt = central_solve(&costs, 4.0, Some(&[(0.0, 1.0), (0.0, 10.0)]), 1e-12).unwrap();
        assert!((opt.x[0] - 1.0).abs() < 1e-12 && (opt.x[1] - 3.0).abs() < 1e-10);
        assert!(matches!(
            central_solve(&costs, 40.0, Some(&[(0.0, 1.0), (0.0, 10.0)]), 1e-12),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn aggregate_examples() {
        let zero = LocalCost { base: BaseCost::Quadratic { a: 0.0, b: 0.0, c: 0.0 }, penalty: None };
        assert_eq!(aggregate_cost(&[zero; 3], &[1.0, -4.0, 9.0]).unwrap(), 0.0);
        let sq = LocalCost::quadratic(1.0, 0.0, 0.0).unwrap();
        assert_eq!(aggregate_cost(&[sq, sq], &[1.0, 2.0]).unwrap(), 5.0);
        assert_eq!(aggregate_cost(&[sq, sq], &[2.0, 1.0]).unwrap(), 5.0);
        assert!(aggregate_cost(&[sq], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cost_csv_round_trip() {
        let rows = vec![
            CostRow { base: BaseCost::Quadratic { a: 0.05, b: 3.5, c: 0.0 }, bounds: Some((20.0, 110.0)) },
            CostRow { base: BaseCost::Quartic { omega: 0.013, alpha: 1.7 }, bounds: None },
        ];
        let text = write_cost_csv(&rows);
        assert_eq!(parse_cost_csv(&text).unwrap(), rows);
        assert!(parse_cost_csv("i,kind\n").is_err());
        assert!(parse_cost_csv(&format!("{COST_CSV_HEADER}\n0,cubic,1,2,3,,\n")).is_err());
        assert!(parse_cost_csv(&format!("{COST_CSV_HEADER}\n1,quartic,1,2,0,,\n")).is_err());
        assert!(parse_cost_csv(&format!("{COST_CSV_HEADER}\n0,quartic,1,2,0,1,\n")).is_err());
    }
}
