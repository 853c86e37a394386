//! Weighted undirected graphs, their Laplacians and spectra.
//!
//! A [`WeightedGraph`] keeps both a dense symmetric weight matrix (for
//! spectral work) and a sorted `i < j` edge list (for the O(|E|) update laws).
//! Graphs are immutable; masking or adding links produces a new value.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::numeric::compensated_sum;
use crate::rng::SimRng;
use crate::{Error, Result};

/// Default weight range for randomly generated links.
pub const DEFAULT_WEIGHT_RANGE: (f64, f64) = (0.5, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    weights: Vec<f64>,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    pub fn empty(n: usize) -> Self {
        Self { n, weights: vec![0.0; n * n], edges: Vec::new() }
    }

    /// Builds a graph from `(i, j, w)` triples. Zero weights mean "no link";
    /// each unordered pair may appear at most once.
    pub fn from_edges<I>(n: usize, links: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut weights = vec![0.0; n * n];
        for (i, j, w) in links {
            if i >= n || j >= n {
                return Err(Error::Config(format!("link ({i},{j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::Config(format!("self-loop at node {i}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(format!("link ({i},{j}) has invalid weight {w}")));
            }
            if weights[i * n + j] != 0.0 {
                return Err(Error::Config(format!("duplicate link ({i},{j})")));
            }
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
        Ok(Self::from_valid_dense(n, weights))
    }

    /// Builds a graph from a row-major dense weight matrix.
    pub fn from_dense(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::Config(format!("dense weights have {} entries, expected {}", weights.len(), n * n)));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(Error::Config(format!("nonzero diagonal at node {i}")));
            }
            for j in (i + 1)..n {
                let (a, b) = (weights[i * n + j], weights[j * n + i]);
                if a != b {
                    return Err(Error::Config(format!("asymmetric weight at ({i},{j}): {a} vs {b}")));
                }
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::Config(format!("invalid weight {a} at ({i},{j})")));
                }
            }
        }
        Ok(Self::from_valid_dense(n, weights))
    }

    fn from_valid_dense(n: usize, weights: Vec<f64>) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = weights[i * n + j];
                if w > 0.0 {
                    edges.push(Edge { i, j, w });
                }
            }
        }
        Self { n, weights, edges }
    }

    pub fn complete(n: usize, w: f64) -> Self {
        let links = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j, w)));
        Self::from_edges(n, links).expect("complete graph is valid")
    }

    pub fn path(n: usize, w: f64) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i, w))).expect("path graph is valid")
    }

    pub fn star(n: usize, w: f64) -> Self {
        Self::from_edges(n, (1..n).map(|i| (0, i, w))).expect("star graph is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Links with `i < j`, in lexicographic order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.weights[i * self.n..(i + 1) * self.n];
        row.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(j, _)| j)
    }

    pub fn dense(&self) -> &[f64] {
        &self.weights
    }

    /// Copy of `self` with link `(i, j)` set to weight `w`.
    pub fn with_link(&self, i: usize, j: usize, w: f64) -> Result<Self> {
        if i >= self.n || j >= self.n || i == j || !w.is_finite() || w < 0.0 {
            return Err(Error::Config(format!("cannot set link ({i},{j}) to {w}")));
        }
        let mut weights = self.weights.clone();
        weights[i * self.n + j] = w;
        weights[j * self.n + i] = w;
        Ok(Self::from_valid_dense(self.n, weights))
    }

    /// Copy of `self` keeping only the links for which `keep` returns true.
    pub fn retain_edges<F: FnMut(&Edge) -> bool>(&self, mut keep: F) -> Self {
        let mut weights = vec![0.0; self.n * self.n];
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if keep(e) {
                weights[e.i * self.n + e.j] = e.w;
                weights[e.j * self.n + e.i] = e.w;
                edges.push(*e);
            }
        }
        Self { n: self.n, weights, edges }
    }

    /// Edge-list text: `n=<count>` then one `i j w` line per link.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for e in &self.edges {
            writeln!(out, "{} {} {}", e.i, e.j, e.w).expect("write to string");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (no, header) = lines.next().ok_or_else(|| Error::Config("edge list is empty".into()))?;
        let n: usize = header
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("line {no}: expected header `n=<count>`")))?;
        let mut links = Vec::new();
        for (no, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                [i, j, w] => i.parse::<usize>().ok().zip(j.parse::<usize>().ok()).zip(w.parse::<f64>().ok()),
                _ => None,
            };
            let ((i, j), w) =
                parsed.ok_or_else(|| Error::Config(format!("line {no}: expected `i j w`, got `{line}`")))?;
            if i >= j {
                return Err(Error::Config(format!("line {no}: links must be listed with i < j")));
            }
            links.push((i, j, w));
        }
        Self::from_edges(n, links)
    }
}

/// Erdős-Rényi graph: each pair linked independently with probability `p`,
/// weights uniform on `weight_range`. Reproducible for a fixed `seed`.
pub fn erdos_renyi(n: usize, p: f64, weight_range: (f64, f64), seed: u64) -> Result<WeightedGraph> {
    erdos_renyi_from(n, p, weight_range, &mut crate::rng::stream(seed, "erdos_renyi"))
}

/// [`erdos_renyi`] drawing from a caller-owned stream.
pub fn erdos_renyi_from(n: usize, p: f64, weight_range: (f64, f64), rng: &mut SimRng) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(Error::Config(format!("erdos_renyi needs n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("link probability {p} not in [0,1]")));
    }
    let (lo, hi) = weight_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::Config(format!("invalid weight range [{lo},{hi}]")));
    }
    let mut links = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                let w = if lo == hi { lo } else { lo + (hi - lo) * rng.random::<f64>() };
                links.push((i, j, w));
            }
        }
    }
    WeightedGraph::from_edges(n, links)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub matrix: DMatrix<f64>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// `x^T L y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| self.matrix[(i, j)] * y[j]).sum();
            acc += x[i] * row;
        }
        acc
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn max_row_sum_abs(&self) -> f64 {
        self.matrix.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max)
    }

    /// Spectrum with the default zero tolerance.
    pub fn spectrum(&self) -> Result<SpectralSummary> {
        let eig = self.eigenvalues()?;
        let tol = default_zero_tolerance(eig.last().copied().unwrap_or(0.0));
        Ok(summarize(eig, tol))
    }

    fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.n();
        if n == 0 {
            return Ok(Vec::new());
        }
        let eig = SymmetricEigen::try_new(self.matrix.clone(), f64::EPSILON, 1000 + 100 * n)
            .ok_or_else(|| Error::Numeric(format!("symmetric eigensolver did not converge (n={n})")))?;
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }
}

/// `L = D - W`, with each diagonal entry the sum of the row's off-diagonal weights.
pub fn laplacian(g: &WeightedGraph) -> Laplacian {
    let n = g.n();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[(i, j)] = -g.weight(i, j);
            }
        }
        m[(i, i)] = compensated_sum((0..n).filter(|&j| j != i).map(|j| g.weight(i, j)));
    }
    Laplacian { matrix: m }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    /// Second-smallest eigenvalue: the smallest one above the zero tolerance
    /// when connected, 0 when the graph has two or more components.
    pub lambda2: f64,
    pub lambda_n: f64,
    /// Ascending; entries within the tolerance of zero are snapped to 0.
    pub eigenvalues: Vec<f64>,
    pub zero_count: usize,
}

impl SpectralSummary {
    pub fn is_connected(&self) -> bool {
        self.lambda2 > 0.0
    }
}

/// Eigenvalues below `1e-8 * lambda_n` (or `1e-12` when `lambda_n = 0`) count as zero.
pub fn default_zero_tolerance(lambda_n: f64) -> f64 {
    if lambda_n > 0.0 {
        1e-8 * lambda_n
    } else {
        1e-12
    }
}

/// Spectrum of `l`, treating eigenvalues `<= tol` as zero.
pub fn spectral_summary(l: &Laplacian, tol: f64) -> Result<SpectralSummary> {
    Ok(summarize(l.eigenvalues()?, tol))
}

fn summarize(mut eigenvalues: Vec<f64>, tol: f64) -> SpectralSummary {
    let mut zero_count = 0;
    for v in eigenvalues.iter_mut() {
        if v.abs() <= tol {
            *v = 0.0;
            zero_count += 1;
        }
    }
    // A second zero eigenvalue means a second component, so lambda2 = 0 exactly then.
    let lambda2 = if zero_count == 1 { eigenvalues.get(1).copied().unwrap_or(0.0) } else { 0.0 };
    let lambda_n = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    SpectralSummary { lambda2, lambda_n, eigenvalues, zero_count }
}

fn bfs_hops(g: &WeightedGraph, src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    let mut queue = VecDeque::new();
    dist[src] = Some(0);
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].expect("queued nodes have a distance");
        for v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// True iff every node is reachable from node 0 over positive-weight links.
pub fn is_connected(g: &WeightedGraph) -> bool {
    g.n() <= 1 || bfs_hops(g, 0).iter().all(Option::is_some)
}

pub fn component_count(g: &WeightedGraph) -> usize {
    let mut seen = vec![false; g.n()];
    let mut count = 0;
    for s in 0..g.n() {
        if seen[s] {
            continue;
        }
        count += 1;
        for (v, d) in bfs_hops(g, s).into_iter().enumerate() {
            if d.is_some() {
                seen[v] = true;
            }
        }
    }
    count
}

/// Unweighted hop diameter of a connected graph.
pub fn diameter(g: &WeightedGraph) -> Result<usize> {
    let mut best = 0;
    for s in 0..g.n() {
        for d in bfs_hops(g, s) {
            match d {
                Some(d) => best = best.max(d),
                None => return Err(Error::Domain("diameter of a disconnected graph".into())),
            }
        }
    }
    Ok(best)
}

/// Link-wise union; a link's weight is its maximum over the inputs.
pub fn union_graph(graphs: &[WeightedGraph]) -> Result<WeightedGraph> {
    let first = graphs.first().ok_or_else(|| Error::Config("union of zero graphs".into()))?;
    let n = first.n();
    let mut weights = vec![0.0_f64; n * n];
    for g in graphs {
        if g.n() != n {
            return Err(Error::Config(format!("union over mismatched node counts {n} and {}", g.n())));
        }
        for e in g.edges() {
            let slot = &mut weights[e.i * n + e.j];
            *slot = slot.max(e.w);
            weights[e.j * n + e.i] = *slot;
        }
    }
    Ok(WeightedGraph::from_valid_dense(n, weights))
}

/// `x - mean(x) * 1`.
pub fn dispersion(x: &[f64]) -> Vec<f64> {
    let m = crate::numeric::mean(x);
    x.iter().map(|v| v - m).collect()
}
