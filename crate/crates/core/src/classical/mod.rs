//! Interpolated chains, exact stopping-time solvers, Monte Carlo, and the
//! classical baseline search loop.

pub mod boxes;

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution as _, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::electric::set_resistance;
use crate::error::{Error, Result};
use crate::graph::{chain_to_graph, Distribution, Ergodicity, ReversibleChain};
use crate::linalg;

/// Holding parameters (q_S, q_M); r = 1/(1 − q) is the expected holding time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationParams {
    pub q_s: f64,
    pub q_m: f64,
}

impl InterpolationParams {
    pub fn new(q_s: f64, q_m: f64) -> Result<Self> {
        for (name, q) in [("q_S", q_s), ("q_M", q_m)] {
            if !(0.0..1.0).contains(&q) {
                return Err(Error::Domain(format!("{name} = {q} not in [0,1)")));
            }
        }
        Ok(InterpolationParams { q_s, q_m })
    }

    pub fn from_holding(r_s: f64, r_m: f64) -> Result<Self> {
        if !(r_s >= 1.0) || !(r_m >= 1.0) || !r_s.is_finite() || !r_m.is_finite() {
            return Err(Error::Domain(format!("holding times must be ≥ 1, got ({r_s}, {r_m})")));
        }
        Self::new(1.0 - 1.0 / r_s, 1.0 - 1.0 / r_m)
    }

    pub fn r_s(&self) -> f64 {
        1.0 / (1.0 - self.q_s)
    }

    pub fn r_m(&self) -> f64 {
        1.0 / (1.0 - self.q_m)
    }
}

/// Expected value that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Finite(f64),
    Infinite,
}

impl Expectation {
    pub fn finite(self) -> Option<f64> {
        match self {
            Expectation::Finite(x) => Some(x),
            Expectation::Infinite => None,
        }
    }
}

/// Rows in `holding` become (1 − q_u)P_{u,·} + q_u e_u; π is rescaled by r_u = 1/(1 − q_u).
fn interpolate_rows(c: &ReversibleChain, q: &[f64]) -> ReversibleChain {
    let n = c.n();
    let mut p = c.transition().clone();
    let mut pi = DVector::zeros(n);
    for u in 0..n {
        if q[u] > 0.0 {
            for v in 0..n {
                p[(u, v)] *= 1.0 - q[u];
            }
            p[(u, u)] += q[u];
        }
        pi[u] = c.stationary()[u] / (1.0 - q[u]);
    }
    let s = pi.sum();
    pi /= s;
    ReversibleChain::from_parts(p, pi)
}

/// P(s) = (1 − s)P + s·P_M.
pub fn interpolate_absorbing(c: &ReversibleChain, marked: &[usize], s: f64) -> Result<ReversibleChain> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::Domain(format!("s = {s} not in [0,1)")));
    }
    if marked.is_empty() {
        return Err(Error::InvalidSet("M is empty".into()));
    }
    let m = linalg::mask(c.n(), marked, "M")?;
    let q: Vec<f64> = m.iter().map(|&b| if b { s } else { 0.0 }).collect();
    Ok(interpolate_rows(c, &q))
}

/// P(q): rows in S held with q_S, rows in M with q_M.
pub fn interpolate_two(
    c: &ReversibleChain,
    s_set: &[usize],
    marked: &[usize],
    params: InterpolationParams,
) -> Result<ReversibleChain> {
    let n = c.n();
    let s = linalg::mask(n, s_set, "S")?;
    let m = linalg::mask(n, marked, "M")?;
    if let Some(u) = (0..n).find(|&u| s[u] && m[u]) {
        return Err(Error::Precondition(format!("S and M share vertex {u}")));
    }
    let q: Vec<f64> = (0..n)
        .map(|u| if s[u] { params.q_s } else if m[u] { params.q_m } else { 0.0 })
        .collect();
    Ok(interpolate_rows(c, &q))
}

/// Vertices from which `target` is reachable along positive transitions.
fn can_reach(c: &ReversibleChain, target: &[bool]) -> Vec<bool> {
    let n = c.n();
    let p = c.transition();
    let mut seen = target.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&u| target[u]).collect();
    while let Some(v) = queue.pop_front() {
        for u in 0..n {
            if !seen[u] && p[(u, v)] > 0.0 {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

/// Solves (I − P_FF) x = b_F on the index set F.
fn solve_on(c: &ReversibleChain, free: &[usize], rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = free.len();
    let p = c.transition();
    let mut a = DMatrix::identity(k, k);
    for (i, &u) in free.iter().enumerate() {
        for (j, &v) in free.iter().enumerate() {
            a[(i, j)] -= p[(u, v)];
        }
    }
    a.lu()
        .solve(rhs)
        .ok_or_else(|| Error::Integrity("first-step system is singular".into()))
}

/// Expected hitting times h_u = E_u(τ_M) for every u (∞ where M is unreachable).
pub fn hitting_times(c: &ReversibleChain, marked: &[usize]) -> Result<Vec<Expectation>> {
    let n = c.n();
    if marked.is_empty() {
        return Err(Error::InvalidSet("M is empty".into()));
    }
    let m = linalg::mask(n, marked, "M")?;
    let reach = can_reach(c, &m);
    let free: Vec<usize> = (0..n).filter(|&u| reach[u] && !m[u]).collect();
    let mut h = vec![Expectation::Infinite; n];
    for &u in marked {
        h[u] = Expectation::Finite(0.0);
    }
    if !free.is_empty() {
        let x = solve_on(c, &free, &DMatrix::from_element(free.len(), 1, 1.0))?;
        for (i, &u) in free.iter().enumerate() {
            h[u] = Expectation::Finite(x[(i, 0)]);
        }
    }
    Ok(h)
}

/// E_σ(τ_M).
pub fn exact_hitting_time(c: &ReversibleChain, marked: &[usize], sigma: &Distribution) -> Result<Expectation> {
    check_len(c, sigma)?;
    let h = hitting_times(c, marked)?;
    let mut total = 0.0;
    for u in sigma.support() {
        match h[u] {
            Expectation::Finite(x) => total += sigma.get(u) * x,
            Expectation::Infinite => return Ok(Expectation::Infinite),
        }
    }
    Ok(Expectation::Finite(total))
}

/// HT(P, M) = E_π(τ_M).
pub fn hitting_time_stationary(c: &ReversibleChain, marked: &[usize]) -> Result<Expectation> {
    exact_hitting_time(c, marked, &c.stationary_distribution())
}

fn check_len(c: &ReversibleChain, sigma: &Distribution) -> Result<()> {
    if sigma.len() != c.n() {
        return Err(Error::InvalidDistribution(format!("length {} does not match n = {}", sigma.len(), c.n())));
    }
    Ok(())
}

fn disjoint_masks(n: usize, s_set: &[usize], marked: &[usize]) -> Result<(Vec<bool>, Vec<bool>)> {
    let s = linalg::mask(n, s_set, "S")?;
    let m = linalg::mask(n, marked, "M")?;
    if s_set.is_empty() || marked.is_empty() {
        return Err(Error::InvalidSet("S and M must be nonempty".into()));
    }
    if let Some(u) = (0..n).find(|&u| s[u] && m[u]) {
        return Err(Error::Precondition(format!("S and M share vertex {u}")));
    }
    Ok((s, m))
}

fn require_irreducible(c: &ReversibleChain) -> Result<()> {
    if c.ergodicity() == Ergodicity::Disconnected {
        return Err(Error::NotErgodic("chain is reducible".into()));
    }
    Ok(())
}

/// Pr_{π|S}(τ_M < τ_S⁺) via the harmonic function h = Pr_·(τ_M < τ_S).
pub fn exact_return_prob(c: &ReversibleChain, s_set: &[usize], marked: &[usize]) -> Result<f64> {
    let n = c.n();
    let (s, m) = disjoint_masks(n, s_set, marked)?;
    require_irreducible(c)?;
    let p = c.transition();
    let free: Vec<usize> = (0..n).filter(|&u| !s[u] && !m[u]).collect();
    let mut h = vec![0.0; n];
    for &u in marked {
        h[u] = 1.0;
    }
    if !free.is_empty() {
        let rhs = DMatrix::from_iterator(free.len(), 1, free.iter().map(|&u| marked.iter().map(|&v| p[(u, v)]).sum::<f64>()));
        let x = solve_on(c, &free, &rhs)?;
        for (i, &u) in free.iter().enumerate() {
            h[u] = x[(i, 0)];
        }
    }
    let pi = c.stationary();
    let pis: f64 = s_set.iter().map(|&u| pi[u]).sum();
    let mut total = 0.0;
    for &u in s_set {
        let step: f64 = (0..n).map(|v| p[(u, v)] * h[v]).sum();
        total += pi[u] / pis * step;
    }
    Ok(total)
}

/// E_{π|S}(τ_S⁺) by first-step analysis.
pub fn exact_expected_return(c: &ReversibleChain, s_set: &[usize]) -> Result<f64> {
    let n = c.n();
    let s = linalg::mask(n, s_set, "S")?;
    if s_set.is_empty() {
        return Err(Error::InvalidSet("S is empty".into()));
    }
    require_irreducible(c)?;
    let p = c.transition();
    let free: Vec<usize> = (0..n).filter(|&u| !s[u]).collect();
    let mut g = vec![0.0; n];
    if !free.is_empty() {
        let x = solve_on(c, &free, &DMatrix::from_element(free.len(), 1, 1.0))?;
        for (i, &u) in free.iter().enumerate() {
            g[u] = x[(i, 0)];
        }
    }
    let pi = c.stationary();
    let pis: f64 = s_set.iter().map(|&u| pi[u]).sum();
    let mut total = 0.0;
    for &u in s_set {
        let step: f64 = free.iter().map(|&v| p[(u, v)] * g[v]).sum();
        total += pi[u] / pis * (1.0 + step);
    }
    Ok(total)
}

/// E_σ(τ^M_S): time to hit M, then time from the hitting position back to S.
pub fn exact_commute_time(
    c: &ReversibleChain,
    s_set: &[usize],
    marked: &[usize],
    sigma: &Distribution,
) -> Result<Expectation> {
    let n = c.n();
    check_len(c, sigma)?;
    let (s, m) = disjoint_masks(n, s_set, marked)?;
    if let Some(u) = sigma.support().into_iter().find(|&u| !s[u]) {
        return Err(Error::Precondition(format!("σ has mass on {u}, outside S")));
    }
    let to_m = match exact_hitting_time(c, marked, sigma)? {
        Expectation::Finite(x) => x,
        Expectation::Infinite => return Ok(Expectation::Infinite),
    };
    // harmonic measure on M from σ: a(u, m) = Pr_u(Y_{τ_M} = m)
    let reach = can_reach(c, &m);
    let free: Vec<usize> = (0..n).filter(|&u| reach[u] && !m[u]).collect();
    let p = c.transition();
    let mut arrival = vec![0.0; marked.len()];
    if !free.is_empty() {
        let rhs = DMatrix::from_fn(free.len(), marked.len(), |i, j| p[(free[i], marked[j])]);
        let a = solve_on(c, &free, &rhs)?;
        for u in sigma.support() {
            let i = free.iter().position(|&x| x == u).expect("σ reaches M");
            for j in 0..marked.len() {
                arrival[j] += sigma.get(u) * a[(i, j)];
            }
        }
    }
    let back = hitting_times(c, s_set)?;
    let mut total = to_m;
    for (j, &v) in marked.iter().enumerate() {
        if arrival[j] > 0.0 {
            match back[v] {
                Expectation::Finite(x) => total += arrival[j] * x,
                Expectation::Infinite => return Ok(Expectation::Infinite),
            }
        }
    }
    Ok(Expectation::Finite(total))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingStats {
    pub hitting_time: Expectation,
    pub return_probability: f64,
    pub expected_return: f64,
    pub commute_time: Expectation,
}

/// All four stopping quantities for (σ, S, M), σ supported on S.
pub fn stopping_stats(
    c: &ReversibleChain,
    s_set: &[usize],
    marked: &[usize],
    sigma: &Distribution,
) -> Result<StoppingStats> {
    Ok(StoppingStats {
        hitting_time: exact_hitting_time(c, marked, sigma)?,
        return_probability: exact_return_prob(c, s_set, marked)?,
        expected_return: exact_expected_return(c, s_set)?,
        commute_time: exact_commute_time(c, s_set, marked, sigma)?,
    })
}

/// Per-row samplers for a chain.
#[derive(Clone, Debug)]
pub struct ChainSampler {
    rows: Vec<WeightedIndex<f64>>,
}

impl ChainSampler {
    pub fn new(c: &ReversibleChain) -> Self {
        let p = c.transition();
        let rows = (0..c.n())
            .map(|u| WeightedIndex::new(p.row(u).iter().copied()).expect("rows are stochastic"))
            .collect();
        ChainSampler { rows }
    }

    pub fn step<R: Rng>(&self, u: usize, rng: &mut R) -> usize {
        self.rows[u].sample(rng)
    }
}

pub fn sample_from<R: Rng>(sigma: &Distribution, rng: &mut R) -> usize {
    WeightedIndex::new(sigma.probs().iter().copied()).expect("valid distribution").sample(rng)
}

/// Trajectory Y_0, …, Y_T with Y_0 ~ σ.
pub fn simulate(c: &ReversibleChain, sigma: &Distribution, steps: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = ChainSampler::new(c);
    let mut y = Vec::with_capacity(steps + 1);
    let mut u = sample_from(sigma, &mut rng);
    y.push(u);
    for _ in 0..steps {
        u = sampler.step(u, &mut rng);
        y.push(u);
    }
    y
}

/// Frequency estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    pub frequency: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl FrequencyEstimate {
    pub fn from_counts(hits: usize, trials: usize) -> Self {
        let f = hits as f64 / trials as f64;
        FrequencyEstimate { frequency: f, std_error: (f * (1.0 - f) / trials as f64).sqrt(), trials }
    }
}

const CHUNKS: usize = 16;

/// Runs `trials` independent trials split over fixed chunks, each with its
/// own generator seeded from (seed, chunk); the count does not depend on scheduling.
pub fn parallel_count<F>(trials: usize, seed: u64, trial: F) -> usize
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    (0..CHUNKS)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            let lo = trials * k / CHUNKS;
            let hi = trials * (k + 1) / CHUNKS;
            (lo..hi).filter(|_| trial(&mut rng)).count()
        })
        .sum()
}

/// C_{S,M} of the chain's graph (W = 2 normalization; the product is scale-free).
pub fn set_commute_quantity(c: &ReversibleChain, s_set: &[usize], marked: &[usize]) -> Result<f64> {
    let g = chain_to_graph(c)?;
    Ok(g.total_weight() * set_resistance(&g, s_set, marked)?)
}

/// Monte Carlo frequency of {τ^M_S ≤ T} from π|_S, after checking
/// 2/T ≤ π(S)·p ≤ 1/C_{S,M}.
pub fn check_claim_commute(
    c: &ReversibleChain,
    s_set: &[usize],
    marked: &[usize],
    p: f64,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<FrequencyEstimate> {
    let n = c.n();
    let (s, m) = disjoint_masks(n, s_set, marked)?;
    let pi = c.stationary();
    let pis: f64 = s_set.iter().map(|&u| pi[u]).sum();
    let csm = set_commute_quantity(c, s_set, marked)?;
    let lo = 2.0 / horizon as f64;
    let mid = pis * p;
    let hi = 1.0 / csm;
    if !(lo <= mid * (1.0 + 1e-12) && mid <= hi * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "need 2/T ≤ π(S)·p ≤ 1/C_(S,M): 2/T = {lo}, π(S)·p = {mid}, 1/C_(S,M) = {hi}"
        )));
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be positive".into()));
    }
    let start = Distribution::restricted(pi.as_slice(), s_set)?;
    let sampler = ChainSampler::new(c);
    let hits = parallel_count(trials, seed, |rng| {
        let mut u = sample_from(&start, rng);
        let mut seen_m = false;
        for _ in 0..horizon {
            u = sampler.step(u, rng);
            if m[u] {
                seen_m = true;
            } else if seen_m && s[u] {
                return true;
            }
        }
        false
    });
    Ok(FrequencyEstimate::from_counts(hits, trials))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub found: Option<usize>,
    /// Walk steps taken (update calls).
    pub updates: usize,
    pub checks: usize,
}

/// Walk from σ, checking the current vertex every `stride` steps, for at
/// most `budget` steps.
pub fn classical_search_baseline(
    c: &ReversibleChain,
    marked: &[usize],
    sigma: &Distribution,
    stride: usize,
    budget: usize,
    seed: u64,
) -> Result<BaselineOutcome> {
    check_len(c, sigma)?;
    if budget == 0 || stride == 0 {
        return Err(Error::Domain("budget and stride must be ≥ 1".into()));
    }
    let m = linalg::mask(c.n(), marked, "M")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = ChainSampler::new(c);
    let mut u = sample_from(sigma, &mut rng);
    let mut out = BaselineOutcome { found: None, updates: 0, checks: 1 };
    if m[u] {
        out.found = Some(u);
        return Ok(out);
    }
    while out.updates < budget {
        for _ in 0..stride.min(budget - out.updates) {
            u = sampler.step(u, &mut rng);
            out.updates += 1;
        }
        out.checks += 1;
        if m[u] {
            out.found = Some(u);
            break;
        }
    }
    Ok(out)
}
