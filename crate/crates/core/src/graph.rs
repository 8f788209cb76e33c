//! Weighted graphs, reversible chains and their spectra.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_MAX_VERTICES: usize = 64;

/// Default tolerances: `algebraic` for exact identities, `spectral` for
/// anything that goes through an eigendecomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub algebraic: f64,
    pub spectral: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { algebraic: 1e-12, spectral: 1e-10 }
    }
}

/// Probability vector over `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probs, 1e-12)
    }

    pub fn with_tolerance(probs: Vec<f64>, tol: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!("entry {i} = {p} is not a nonnegative number")));
            }
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!("entries sum to {s}, not 1")));
        }
        Ok(Distribution { probs })
    }

    pub fn point(n: usize, u: usize) -> Result<Self> {
        if u >= n {
            return Err(Error::InvalidDistribution(format!("vertex {u} out of range (n = {n})")));
        }
        let mut p = vec![0.0; n];
        p[u] = 1.0;
        Ok(Distribution { probs: p })
    }

    /// Normalized restriction of a weight vector to `set`.
    pub fn restricted(weights: &[f64], set: &[usize]) -> Result<Self> {
        let m = linalg::mask(weights.len(), set, "restriction set")?;
        let total: f64 = set.iter().map(|&u| weights[u]).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("restriction has zero mass".into()));
        }
        let probs = weights
            .iter()
            .zip(&m)
            .map(|(&w, &b)| if b { w / total } else { 0.0 })
            .collect();
        Ok(Distribution { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, u: usize) -> f64 {
        self.probs[u]
    }

    pub fn support(&self) -> Vec<usize> {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, _)| i).collect()
    }

    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&u| self.probs[u]).sum()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.probs)
    }

    /// Entrywise square root, the amplitude vector |√σ⟩.
    pub fn sqrt_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.probs.len(), self.probs.iter().map(|p| p.sqrt()))
    }
}

/// Symmetric nonnegative conductances; self-loops allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    w: DMatrix<f64>,
}

impl WeightedGraph {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        Self::with_cap(weights, DEFAULT_MAX_VERTICES)
    }

    pub fn with_cap(weights: DMatrix<f64>, max_vertices: usize) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 || weights.ncols() != n {
            return Err(Error::InvalidGraph(format!("weight matrix must be square and nonempty, got {}x{}", n, weights.ncols())));
        }
        if n > max_vertices {
            return Err(Error::Size { dim: n, cap: max_vertices });
        }
        let mut w = weights;
        for u in 0..n {
            for v in u..n {
                let (a, b) = (w[(u, v)], w[(v, u)]);
                if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
                    return Err(Error::InvalidGraph(format!("edge ({u},{v}) has invalid weight")));
                }
                if (a - b).abs() > 1e-12 * a.max(b).max(1.0) {
                    return Err(Error::InvalidGraph(format!("asymmetric weights on edge ({u},{v}): {a} vs {b}")));
                }
                let s = 0.5 * (a + b);
                w[(u, v)] = s;
                w[(v, u)] = s;
            }
        }
        for u in 0..n {
            if w.row(u).sum() <= 0.0 {
                return Err(Error::IsolatedVertex { vertex: u });
            }
        }
        Ok(WeightedGraph { w })
    }

    /// Undirected edge list; repeated edges add up, `(u, u, x)` is a self-loop of weight x.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = DMatrix::zeros(n, n);
        for &(u, v, x) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u},{v}) out of range (n = {n})")));
            }
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidGraph(format!("edge ({u},{v}) has invalid weight {x}")));
            }
            w[(u, v)] += x;
            if u != v {
                w[(v, u)] += x;
            }
        }
        Self::new(w)
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.w[(u, v)]
    }

    /// w_u = Σ_v w_{u,v}.
    pub fn degree(&self, u: usize) -> f64 {
        self.w.row(u).sum()
    }

    /// W = Σ_{u,v} w_{u,v}.
    pub fn total_weight(&self) -> f64 {
        self.w.sum()
    }

    pub fn stationary(&self) -> Distribution {
        let total = self.total_weight();
        Distribution { probs: (0..self.n()).map(|u| self.degree(u) / total).collect() }
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&v| self.w[(u, v)] > 0.0)
    }

    /// Copy with weight `x` added on the undirected edge {u, v}.
    pub fn with_edge_added(&self, u: usize, v: usize, x: f64) -> Result<Self> {
        let mut w = self.w.clone();
        w[(u, v)] += x;
        if u != v {
            w[(v, u)] += x;
        }
        Self::new(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ergodicity {
    Ergodic,
    Disconnected,
    Bipartite,
}

/// Structural check on a positivity pattern: BFS for connectivity, then
/// two-coloring. A self-loop is an odd cycle.
pub(crate) fn pattern_ergodicity(n: usize, adjacent: impl Fn(usize, usize) -> bool) -> Ergodicity {
    let mut color = vec![-1i8; n];
    let mut bipartite = true;
    color[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    let mut seen = 1;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if !adjacent(u, v) {
                continue;
            }
            if color[v] < 0 {
                color[v] = 1 - color[u];
                seen += 1;
                queue.push_back(v);
            } else if color[v] == color[u] {
                bipartite = false;
            }
        }
    }
    if seen < n {
        Ergodicity::Disconnected
    } else if bipartite {
        Ergodicity::Bipartite
    } else {
        Ergodicity::Ergodic
    }
}

pub fn check_ergodic(g: &WeightedGraph) -> Ergodicity {
    pattern_ergodicity(g.n(), |u, v| g.weight(u, v) > 0.0)
}

/// Row-stochastic P with reversible stationary distribution π.
#[derive(Clone, Debug, PartialEq)]
pub struct ReversibleChain {
    p: DMatrix<f64>,
    pi: DVector<f64>,
}

impl ReversibleChain {
    pub fn new(p: DMatrix<f64>, pi: DVector<f64>) -> Result<Self> {
        Self::with_tolerance(p, pi, Tolerances::default().algebraic)
    }

    pub fn with_tolerance(p: DMatrix<f64>, pi: DVector<f64>, tol: f64) -> Result<Self> {
        let n = p.nrows();
        if n == 0 || p.ncols() != n || pi.len() != n {
            return Err(Error::InvalidChain("dimension mismatch".into()));
        }
        if p.iter().chain(pi.iter()).any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidChain("negative or non-finite entry".into()));
        }
        let c = ReversibleChain { p, pi };
        let rows = c.row_sum_residual();
        if rows > tol {
            return Err(Error::InvalidChain(format!("row sums deviate from 1 by {rows:e}")));
        }
        if (c.pi.sum() - 1.0).abs() > tol {
            return Err(Error::InvalidChain("π does not sum to 1".into()));
        }
        let db = c.detailed_balance_residual();
        if db > tol {
            return Err(Error::NonReversible { residual: db });
        }
        Ok(c)
    }

    pub(crate) fn from_parts(p: DMatrix<f64>, pi: DVector<f64>) -> Self {
        ReversibleChain { p, pi }
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn stationary_distribution(&self) -> Distribution {
        Distribution { probs: self.pi.iter().copied().collect() }
    }

    pub fn row_sum_residual(&self) -> f64 {
        self.p.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// max |π_u P_{u,v} − π_v P_{v,u}|.
    pub fn detailed_balance_residual(&self) -> f64 {
        let n = self.n();
        let mut r: f64 = 0.0;
        for u in 0..n {
            for v in 0..n {
                r = r.max((self.pi[u] * self.p[(u, v)] - self.pi[v] * self.p[(v, u)]).abs());
            }
        }
        r
    }

    /// max |(πP − π)_v|.
    pub fn stationarity_residual(&self) -> f64 {
        let left = self.p.transpose() * &self.pi;
        (left - &self.pi).amax()
    }

    pub fn ergodicity(&self) -> Ergodicity {
        pattern_ergodicity(self.n(), |u, v| self.p[(u, v)] > 0.0)
    }

    /// diag(√π)·P·diag(√π)⁻¹, symmetrized.
    pub(crate) fn symmetrized(&self) -> DMatrix<f64> {
        let n = self.n();
        let s: Vec<f64> = self.pi.iter().map(|x| x.sqrt()).collect();
        let mut d = DMatrix::zeros(n, n);
        for u in 0..n {
            for v in 0..n {
                d[(u, v)] = s[u] * self.p[(u, v)] / s[v];
            }
        }
        (&d + d.transpose()) * 0.5
    }
}

pub fn build_chain(g: &WeightedGraph) -> Result<ReversibleChain> {
    let n = g.n();
    let total = g.total_weight();
    let mut p = DMatrix::zeros(n, n);
    let mut pi = DVector::zeros(n);
    for u in 0..n {
        let wu = g.degree(u);
        if wu <= 0.0 {
            return Err(Error::IsolatedVertex { vertex: u });
        }
        for v in 0..n {
            p[(u, v)] = g.weight(u, v) / wu;
        }
        pi[u] = wu / total;
    }
    Ok(ReversibleChain { p, pi })
}

/// w_{u,v} = 2π_u P_{u,v}; the result has W = 2.
pub fn chain_to_graph(c: &ReversibleChain) -> Result<WeightedGraph> {
    let db = c.detailed_balance_residual();
    if db > Tolerances::default().algebraic {
        return Err(Error::NonReversible { residual: db });
    }
    let n = c.n();
    let mut w = DMatrix::zeros(n, n);
    for u in 0..n {
        for v in 0..n {
            w[(u, v)] = c.pi[u] * c.p[(u, v)] + c.pi[v] * c.p[(v, u)];
        }
    }
    WeightedGraph::with_cap(w, usize::MAX)
}

/// δ = min(1 − |λ_1|, 1 − |λ_{n−1}|) over the nontrivial eigenvalues.
pub fn spectral_gap(c: &ReversibleChain) -> Result<f64> {
    match c.ergodicity() {
        Ergodicity::Ergodic => {}
        other => return Err(Error::NotErgodic(format!("{other:?}").to_lowercase())),
    }
    let eig = linalg::sym_eigen(&c.symmetrized());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let second = vals.iter().skip(1).fold(0.0f64, |m, x| m.max(x.abs()));
    Ok((1.0 - second).clamp(0.0, 1.0))
}

#[derive(Clone, Debug)]
pub struct ChainPower {
    pub chain: ReversibleChain,
    /// Set for t = 0: the identity chain never moves.
    pub degenerate: bool,
}

pub fn chain_power(c: &ReversibleChain, t: u32) -> ChainPower {
    let n = c.n();
    if t == 0 {
        return ChainPower {
            chain: ReversibleChain { p: DMatrix::identity(n, n), pi: c.pi.clone() },
            degenerate: true,
        };
    }
    let mut result: Option<DMatrix<f64>> = None;
    let mut base = c.p.clone();
    let mut e = t;
    while e > 0 {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r * &base,
            });
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    ChainPower { chain: ReversibleChain { p: result.unwrap(), pi: c.pi.clone() }, degenerate: false }
}
