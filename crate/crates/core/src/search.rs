//! Fast-forwarding search, the simple interpolated-walk search,
//! amplitude amplification and the t-step variant.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::distributions::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use crate::classical::{interpolate_two, InterpolationParams};
use crate::electric::{build_modified_instance, commute_quantity, ModifiedInstance};
use crate::error::{Error, Result};
use crate::fast_forward::{truncation_degree, ChebyshevExpansion, Ladder};
use crate::graph::{chain_power, chain_to_graph, Distribution, ReversibleChain};
use crate::linalg;
use crate::quantum::{
    discriminant, CallCounts, DiscriminantMatrix, InterpolatedWalk, Lambda, ModifiedWalk, SzegedyWalk, WalkOperator,
};

/// User-facing knobs; unset fields take the documented defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub horizon: usize,
    pub r_s: Option<f64>,
    pub eps_ff: Option<f64>,
    pub aa_rounds: Option<u32>,
    /// Resistance budget C; defaults to the exact C_{σ,M}.
    pub budget: Option<f64>,
    /// Simple search repeats ⌈log₂T⌉·shot_factor shots.
    pub shot_factor: usize,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(horizon: usize, seed: u64) -> Self {
        SearchConfig { horizon, r_s: None, eps_ff: None, aa_rounds: None, budget: None, shot_factor: 8, seed }
    }

    pub fn resolve(&self, default_budget: f64) -> Result<ResolvedConfig> {
        let t = self.horizon;
        if t < 2 || t % 2 == 1 {
            return Err(Error::Config(format!("T = {t} must be even and ≥ 2")));
        }
        let log_t = (t as f64).log2().ceil().max(1.0);
        let r_s = self.r_s.unwrap_or((t as f64 / 60.0).max(1.0));
        if !(r_s >= 1.0) || !r_s.is_finite() {
            return Err(Error::Config(format!("r_S = {r_s} must be ≥ 1")));
        }
        let eps_ff = self.eps_ff.unwrap_or(1.0 / (8.0 * log_t));
        if !(eps_ff > 0.0 && eps_ff < 1.0) {
            return Err(Error::Config(format!("eps_ff = {eps_ff} not in (0,1)")));
        }
        let aa_rounds = self.aa_rounds.unwrap_or(((t as f64).log2().sqrt()).ceil() as u32);
        let budget = self.budget.unwrap_or(default_budget);
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(Error::Config(format!("budget C = {budget} must be positive")));
        }
        let levels = (14.0 * t as f64).log2().ceil() as u32;
        let r_m: Vec<u64> = (0..=levels).map(|j| 1u64 << j).collect();
        if self.shot_factor == 0 {
            return Err(Error::Config("shot_factor must be ≥ 1".into()));
        }
        Ok(ResolvedConfig {
            horizon: t,
            r_s,
            q_s: 1.0 - 1.0 / r_s,
            q_m: r_m.iter().map(|&r| 1.0 - 1.0 / r as f64).collect(),
            r_m,
            eps_ff,
            aa_rounds,
            budget,
            shots: log_t as usize * self.shot_factor,
            seed: self.seed,
        })
    }
}

/// Config with every default filled in; recorded in each outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub horizon: usize,
    pub r_s: f64,
    pub q_s: f64,
    pub r_m: Vec<u64>,
    pub q_m: Vec<f64>,
    pub eps_ff: f64,
    pub aa_rounds: u32,
    pub budget: f64,
    pub shots: usize,
    pub seed: u64,
}

impl ResolvedConfig {
    pub fn q_size(&self) -> usize {
        self.q_m.len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchCounters {
    pub walk: u64,
    pub check: u64,
    pub lambda: u64,
    pub setup: u64,
}

impl SearchCounters {
    fn from_calls(c: CallCounts, setup: u64) -> Self {
        SearchCounters { walk: c.walk, check: c.check, lambda: c.lambda, setup }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: usize,
    pub r_m: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub algorithm: String,
    pub found: Option<usize>,
    /// Exact: post-amplification for fast-forward search, single shot for simple search.
    pub success_probability: f64,
    pub pre_amplification: f64,
    /// Simple search only: 1 − (1 − p)^shots.
    pub repeated_success: Option<f64>,
    pub counters: SearchCounters,
    pub config: ResolvedConfig,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
}

/// Everything derived from (P, σ, M, C) on the two-layer graph.
#[derive(Clone, Debug)]
pub struct SearchInstance {
    pub modified: ModifiedInstance,
    pub lambda: Lambda,
    /// Block of the (possibly fast-forwarded) inner walk on the original vertices.
    pub base_block: DMatrix<f64>,
    /// Discriminant of the modified chain, in modified-graph vertex order.
    pub dprime: DMatrix<f64>,
    pub sqrt_sigma: DVector<f64>,
    pub s_mask: Vec<bool>,
    pub m_mask: Vec<bool>,
    pub warnings: Vec<String>,
}

/// Layer-0 block α_uα_vB_{uv}, pendant links β_u.
pub fn modified_discriminant(base_block: &DMatrix<f64>, lambda: &Lambda, mi: &ModifiedInstance) -> DMatrix<f64> {
    let n = mi.base_n;
    let n2 = mi.graph.n();
    let mut d = DMatrix::zeros(n2, n2);
    for u in 0..n {
        for v in 0..n {
            d[(u, v)] = lambda.alpha[u] * lambda.alpha[v] * base_block[(u, v)];
        }
    }
    for (i, &u) in mi.layer1_of.iter().enumerate() {
        d[(u, n + i)] = lambda.beta[u];
        d[(n + i, u)] = lambda.beta[u];
    }
    d
}

fn check_inputs(c: &ReversibleChain, sigma: &Distribution, marked: &[usize]) -> Result<Vec<bool>> {
    if sigma.len() != c.n() {
        return Err(Error::InvalidDistribution("σ length does not match the chain".into()));
    }
    let m = linalg::mask(c.n(), marked, "M")?;
    if let Some(u) = sigma.support().into_iter().find(|&u| m[u]) {
        return Err(Error::Precondition(format!("σ has mass on marked vertex {u}")));
    }
    Ok(m)
}

fn default_budget(c: &ReversibleChain, sigma: &Distribution, marked: &[usize]) -> Result<f64> {
    if marked.is_empty() {
        return Ok(1.0);
    }
    commute_quantity(&chain_to_graph(c)?, sigma, marked)
}

impl SearchInstance {
    /// Modified instance for budget C with inner walk block `base_block`.
    pub fn build(
        c: &ReversibleChain,
        sigma: &Distribution,
        marked: &[usize],
        budget: f64,
        base_block: DMatrix<f64>,
    ) -> Result<Self> {
        check_inputs(c, sigma, marked)?;
        let g = chain_to_graph(c)?;
        let mut warnings = Vec::new();
        if !marked.is_empty() {
            let exact = commute_quantity(&g, sigma, marked)?;
            if budget < exact * (1.0 - 1e-12) {
                warnings.push(format!("budget C = {budget} is below C_(σ,M) = {exact}"));
            }
        }
        let mi = build_modified_instance(&g, sigma, marked, budget)?;
        let lambda = Lambda::new(sigma, c.stationary().as_slice(), budget)?;
        let dprime = modified_discriminant(&base_block, &lambda, &mi);
        let n2 = mi.graph.n();
        let sqrt_sigma = mi.sigma_prime.sqrt_vector();
        let mut s_mask = vec![false; n2];
        for &s in &mi.source_prime {
            s_mask[s] = true;
        }
        let mut m_mask = vec![false; n2];
        for &m in marked {
            m_mask[m] = true;
        }
        Ok(SearchInstance { modified: mi, lambda, base_block, dprime, sqrt_sigma, s_mask, m_mask, warnings })
    }

    /// D(q) = diag(√(1−q)) D′ diag(√(1−q)) + diag(q).
    pub fn interpolated(&self, q_s: f64, q_m: f64) -> Result<DiscriminantMatrix> {
        let q = self.holding(q_s, q_m);
        let n = q.len();
        let mut d = self.dprime.clone();
        for u in 0..n {
            for v in 0..n {
                d[(u, v)] *= ((1.0 - q[u]) * (1.0 - q[v])).sqrt();
            }
            d[(u, u)] += q[u];
        }
        DiscriminantMatrix::from_symmetric(d)
    }

    fn holding(&self, q_s: f64, q_m: f64) -> Vec<f64> {
        (0..self.dprime.nrows())
            .map(|u| {
                if self.s_mask[u] {
                    q_s
                } else if self.m_mask[u] {
                    q_m
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn marked_weight(&self, v: &DVector<f64>) -> f64 {
        v.iter().zip(&self.m_mask).filter(|(_, &m)| m).map(|(x, _)| x * x).sum()
    }
}

fn check_prob(p: f64, what: &str) -> Result<f64> {
    if !(-1e-9..=1.0 + 1e-9).contains(&p) || !p.is_finite() {
        return Err(Error::Integrity(format!("{what} = {p} outside [0,1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Grover iteration (2|ψ⟩⟨ψ| − I)(I − 2Π_good), `rounds` times.
pub fn amplitude_amplify(initial: &DVector<f64>, good: &[bool], rounds: u32) -> Result<DVector<f64>> {
    if good.len() != initial.len() {
        return Err(Error::Domain("good mask does not match the state".into()));
    }
    let drift = (initial.norm() - 1.0).abs();
    if drift > 1e-8 {
        return Err(Error::Integrity(format!("initial state norm drifts by {drift:e}")));
    }
    let mut x = initial.clone();
    for _ in 0..rounds {
        for (xi, &g) in x.iter_mut().zip(good) {
            if g {
                *xi = -*xi;
            }
        }
        let overlap = initial.dot(&x);
        x = initial * (2.0 * overlap) - x;
    }
    Ok(x)
}

pub fn good_probability(x: &DVector<f64>, good: &[bool]) -> f64 {
    x.iter().zip(good).filter(|(_, &g)| g).map(|(a, _)| a * a).sum()
}

/// Exact (t, r_M) grid of ‖Π_M D^t(q)|√σ⟩‖² with σ = π|_S.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub entries: Vec<TraceEntry>,
    pub average: f64,
    pub hypothesis_holds: bool,
    pub warnings: Vec<String>,
}

pub fn success_probability_profile(
    c: &ReversibleChain,
    s_set: &[usize],
    marked: &[usize],
    cfg: &ResolvedConfig,
) -> Result<Profile> {
    let pi = c.stationary();
    let sigma = Distribution::restricted(pi.as_slice(), s_set)?;
    check_inputs(c, &sigma, marked)?;
    let mut warnings = Vec::new();
    let mut hypothesis_holds = false;
    if !marked.is_empty() {
        let g = chain_to_graph(c)?;
        let cq = commute_quantity(&g, &sigma, marked)?;
        let ps: f64 = s_set.iter().map(|&u| pi[u]).sum();
        hypothesis_holds = ps >= 1.0 / cq - 1e-12 && ps <= 2.0 / cq + 1e-12;
        if !hypothesis_holds {
            warnings.push(format!("π(S) = {ps} outside [1/C, 2/C] with C = {cq}"));
        }
    }
    let m_mask = linalg::mask(c.n(), marked, "M")?;
    let psi = sigma.sqrt_vector();
    let mut entries = Vec::with_capacity(cfg.horizon * cfg.q_size());
    for (j, &q_m) in cfg.q_m.iter().enumerate() {
        let pq = interpolate_two(c, s_set, marked, InterpolationParams::new(cfg.q_s, q_m)?)?;
        let d = discriminant(&pq)?;
        let eig = d.eigenvalues();
        let coords = d.eigenvectors().tr_mul(&psi);
        for t in 1..=cfg.horizon {
            let mut scaled = coords.clone();
            for i in 0..scaled.len() {
                scaled[i] *= eig[i].powi(t as i32);
            }
            let v = d.eigenvectors() * scaled;
            let value = v.iter().zip(&m_mask).filter(|(_, &m)| m).map(|(x, _)| x * x).sum();
            entries.push(TraceEntry { t, r_m: cfg.r_m[j], value });
        }
    }
    let average = entries.iter().map(|e| e.value).sum::<f64>() / entries.len() as f64;
    Ok(Profile { entries, average, hypothesis_holds, warnings })
}

/// Both sides of ‖Π_M D^t(q)|√σ⟩‖ ≥ Pr(Y_t ∈ M, Y_{t′} ∈ S), σ = π|_S.
pub fn norm_vs_joint_probability(
    c: &ReversibleChain,
    s_set: &[usize],
    marked: &[usize],
    params: InterpolationParams,
    t: u32,
    t_later: u32,
) -> Result<(f64, f64)> {
    if t_later <= t {
        return Err(Error::Domain(format!("need t′ > t, got t = {t}, t′ = {t_later}")));
    }
    let pq = interpolate_two(c, s_set, marked, params)?;
    // holding on S rescales π uniformly there, so π|_S is the same for P and P(q)
    let sigma0 = Distribution::restricted(c.stationary().as_slice(), s_set)?;
    let d = discriminant(&pq)?;
    let v = d.apply_fn(|x| x.powi(t as i32), &sigma0.sqrt_vector());
    let m = linalg::mask(c.n(), marked, "M")?;
    let s = linalg::mask(c.n(), s_set, "S")?;
    let lhs = v.iter().zip(&m).filter(|(_, &b)| b).map(|(x, _)| x * x).sum::<f64>().sqrt();
    let row = chain_power(&pq, t).chain.transition().tr_mul(&sigma0.to_vector());
    let back = chain_power(&pq, t_later - t).chain;
    let ones = DVector::from_iterator(c.n(), s.iter().map(|&b| b as u8 as f64));
    let ret = back.transition() * ones;
    let rhs = (0..c.n()).filter(|&u| m[u]).map(|u| row[u] * ret[u]).sum();
    Ok((lhs, rhs))
}

fn ladder_calls(max_degree: u64) -> u64 {
    let m = max_degree / 2 + 1;
    let mut sectors = 2u64;
    while sectors < m {
        sectors *= 2;
    }
    2 * (sectors - 1) + 1
}

/// Fast-forward search on a prepared instance; `inner_calls` is the cost of one base walk.
fn run_fastforward(
    inst: &SearchInstance,
    cfg: &ResolvedConfig,
    inner_calls: CallCounts,
    name: &str,
) -> Result<SearchOutcome> {
    let tt = cfg.horizon;
    let nq = cfg.q_size();
    let n2 = inst.dprime.nrows();
    let expansions: Vec<ChebyshevExpansion> =
        (1..=tt as u64).map(|t| ChebyshevExpansion::for_precision(t, cfg.eps_ff)).collect::<Result<_>>()?;
    let norm = 1.0 / ((tt * nq) as f64).sqrt();
    // flagged part of U|ψ⟩, then one coordinate for the unflagged remainder
    let mut state = DVector::zeros(tt * nq * n2 + 1);
    let mut good = vec![false; state.len()];
    let mut trace = Vec::with_capacity(tt * nq);
    for (j, &q_m) in cfg.q_m.iter().enumerate() {
        let d = inst.interpolated(cfg.q_s, q_m)?;
        let eig = d.eigenvalues();
        let coords = d.eigenvectors().tr_mul(&inst.sqrt_sigma);
        for (ti, e) in expansions.iter().enumerate() {
            let mut scaled = coords.clone();
            for i in 0..scaled.len() {
                scaled[i] *= e.eval(eig[i].clamp(-1.0, 1.0))? / e.alpha();
            }
            let v = d.eigenvectors() * scaled;
            trace.push(TraceEntry { t: ti + 1, r_m: cfg.r_m[j], value: inst.marked_weight(&v) });
            let off = (j * tt + ti) * n2;
            for u in 0..n2 {
                state[off + u] = v[u] * norm;
                good[off + u] = inst.m_mask[u];
            }
        }
    }
    let flagged = state.norm_squared();
    if flagged > 1.0 + 1e-9 {
        return Err(Error::Integrity(format!("flagged weight {flagged} exceeds 1")));
    }
    let last = state.len() - 1;
    state[last] = (1.0 - flagged).max(0.0).sqrt();
    let pre = check_prob(good_probability(&state, &good), "pre-amplification probability")?;
    let out = amplitude_amplify(&state, &good, cfg.aa_rounds)?;
    let success = check_prob(good_probability(&out, &good), "success probability")?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let found = if rng.gen::<f64>() < success {
        let mut weights = vec![0.0; n2];
        for (i, x) in out.iter().enumerate().take(last) {
            if good[i] {
                weights[i % n2] += x * x;
            }
        }
        Some(sample_index(&weights, &mut rng))
    } else {
        None
    };

    let max_degree = expansions.iter().map(|e| e.d()).max().unwrap_or(1);
    let per_u = inner_calls.times(ladder_calls(max_degree));
    let applications = 2 * cfg.aa_rounds as u64 + 1;
    let mut warnings = inst.warnings.clone();
    if success < 0.5 {
        warnings.push(format!("success probability {success:.4} below 1/2 at T = {tt}"));
    }
    Ok(SearchOutcome {
        algorithm: name.into(),
        found,
        success_probability: success,
        pre_amplification: pre,
        repeated_success: None,
        counters: SearchCounters::from_calls(per_u.times(applications), applications),
        config: cfg.clone(),
        trace,
        warnings,
    })
}

fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// One base walk on the modified graph: Szegedy(P) → Λ → holding on S′ → holding on M.
pub const COMPOSITE_BASE_CALLS: CallCounts = CallCounts { walk: 1, check: 4, lambda: 2 };

/// Fast-forward search with amplitude amplification.
pub fn search_fastforward(
    c: &ReversibleChain,
    sigma: &Distribution,
    marked: &[usize],
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    check_inputs(c, sigma, marked)?;
    let rc = cfg.resolve(default_budget(c, sigma, marked)?)?;
    let d = discriminant(c)?;
    let inst = SearchInstance::build(c, sigma, marked, rc.budget, d.matrix().clone())?;
    run_fastforward(&inst, &rc, COMPOSITE_BASE_CALLS, "fastforward")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub runs: Vec<SearchOutcome>,
    /// Smallest T in the sweep whose success reached the threshold.
    pub horizon: Option<usize>,
    pub threshold: f64,
}

/// Fast-forward search at T = start, 2·start, … ≤ max_horizon, stopping at the first
/// T with success ≥ threshold.
pub fn search_fastforward_sweep(
    c: &ReversibleChain,
    sigma: &Distribution,
    marked: &[usize],
    cfg: &SearchConfig,
    start: usize,
    max_horizon: usize,
    threshold: f64,
) -> Result<SweepOutcome> {
    let mut runs = Vec::new();
    let mut t = start.max(2);
    while t <= max_horizon {
        let mut local = cfg.clone();
        local.horizon = t;
        let out = search_fastforward(c, sigma, marked, &local)?;
        let hit = out.success_probability >= threshold;
        runs.push(out);
        if hit {
            return Ok(SweepOutcome { runs, horizon: Some(t), threshold });
        }
        t *= 2;
    }
    Ok(SweepOutcome { runs, horizon: None, threshold })
}

/// Draws of the signed Chebyshev index k (parity of t) with weight
/// 2^{−t}C(t,(t+k)/2), conditioned on |k| ≤ cap.
#[derive(Clone, Debug)]
pub struct OffsetSampler {
    t: u64,
    cap: u64,
    binomial: Binomial,
    acceptance: f64,
}

impl OffsetSampler {
    pub fn new(t: u64, cap: u64) -> Result<Self> {
        if cap < 1 {
            return Err(Error::Domain("cap must be ≥ 1".into()));
        }
        let d = if cap >= t { t } else if cap % 2 == t % 2 { cap } else { cap - 1 };
        let acceptance = if d < t % 2 { 0.0 } else { ChebyshevExpansion::new(t, d)?.alpha() };
        if acceptance < 1e-6 {
            return Err(Error::Domain(format!("acceptance mass {acceptance:e} below 1e-6 for t = {t}, cap = {cap}")));
        }
        let binomial = Binomial::new(t, 0.5).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(OffsetSampler { t, cap, binomial, acceptance })
    }

    pub fn acceptance(&self) -> f64 {
        self.acceptance
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> i64 {
        loop {
            let i = self.binomial.sample(rng) as i64;
            let k = 2 * i - self.t as i64;
            if k.unsigned_abs() <= self.cap {
                return k;
            }
        }
    }
}

pub fn sample_binomial_offset(t: u64, cap: u64, seed: u64) -> Result<i64> {
    let s = OffsetSampler::new(t, cap)?;
    Ok(s.sample(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// ⌈√(2t·ln(2T))⌉.
pub fn offset_cap(t: u64, horizon: usize) -> u64 {
    (2.0 * t as f64 * (2.0 * horizon as f64).ln()).sqrt().ceil().max(1.0) as u64
}

/// Truncation degree used by simple search: the cap, parity-adjusted, at most t.
pub fn cap_degree(t: u64, horizon: usize) -> u64 {
    let cap = offset_cap(t, horizon);
    if cap >= t {
        t
    } else if cap % 2 == t % 2 {
        cap
    } else {
        cap - 1
    }
}

/// The circuit W(P′(q)) on the embedded system register (b, u).
pub struct CompositeWalk {
    pub op: Arc<dyn WalkOperator>,
    /// Embedded position of each modified-graph vertex.
    pub embedding: Vec<usize>,
    pub base_n: usize,
}

impl SearchInstance {
    pub fn composite(&self, c: &ReversibleChain, q_s: f64, q_m: f64) -> Result<CompositeWalk> {
        let n = self.modified.base_n;
        let sz: Arc<dyn WalkOperator> = Arc::new(SzegedyWalk::new(c)?);
        let md: Arc<dyn WalkOperator> = Arc::new(ModifiedWalk::new(sz, self.lambda.clone())?);
        let embedding = self.modified.system_embedding();
        let mut s_emb = vec![false; 2 * n];
        let mut m_emb = vec![false; 2 * n];
        for (i, &p) in embedding.iter().enumerate() {
            s_emb[p] = self.s_mask[i];
            m_emb[p] = self.m_mask[i];
        }
        let is: Arc<dyn WalkOperator> = Arc::new(InterpolatedWalk::new(md, &s_emb, q_s)?);
        let op: Arc<dyn WalkOperator> = Arc::new(InterpolatedWalk::new(is, &m_emb, q_m)?);
        Ok(CompositeWalk { op, embedding, base_n: n })
    }
}

impl CompositeWalk {
    pub fn initial(&self, sqrt_sigma: &DVector<f64>) -> DVector<f64> {
        let l = self.op.layout();
        let mut x = DVector::zeros(l.dim());
        for (i, &p) in self.embedding.iter().enumerate() {
            x[l.index(l.flag, p)] = sqrt_sigma[i];
        }
        x
    }

    fn reflect(&self, x: &mut DVector<f64>) {
        let l = self.op.layout();
        for s in 0..l.system_dim {
            x[l.index(l.flag, s)] *= -1.0;
        }
    }

    /// Vertex distributions after j steps, j = 0..=max_steps:
    /// G^{j/2}φ for even j and W·G^{(j−1)/2}φ for odd j.
    pub fn step_distributions(&self, phi: &DVector<f64>, max_steps: usize) -> Vec<Vec<f64>> {
        let l = self.op.layout();
        let dist = |x: &DVector<f64>| {
            let mut p = vec![0.0; l.system_dim];
            for a in 0..l.ancilla_dim {
                for (s, ps) in p.iter_mut().enumerate() {
                    *ps += x[l.index(a, s)].powi(2);
                }
            }
            p
        };
        let mut out = Vec::with_capacity(max_steps + 1);
        let mut even = phi.clone();
        loop {
            out.push(dist(&even));
            if out.len() > max_steps {
                break;
            }
            let mut w = self.op.apply(&even);
            out.push(dist(&w));
            if out.len() > max_steps {
                break;
            }
            self.reflect(&mut w);
            let mut back = self.op.apply_adjoint(&w);
            self.reflect(&mut back);
            even = back;
        }
        out
    }
}

/// the simple search's (r_M, t, k) mixture and its per-step distributions.
pub struct Alg2Tables {
    /// Per q_M index, per step count, the embedded vertex distribution.
    pub steps: Vec<Vec<Vec<f64>>>,
    pub mixture: Vec<f64>,
    pub per_cell: Vec<TraceEntry>,
    pub calls: CallCounts,
}

fn alg2_tables<F: Fn(u64) -> u64>(
    c: &ReversibleChain,
    inst: &SearchInstance,
    cfg: &ResolvedConfig,
    degree_for: F,
) -> Result<Alg2Tables> {
    let tt = cfg.horizon;
    let n = inst.modified.base_n;
    let expansions: Vec<ChebyshevExpansion> =
        (1..=tt as u64).map(|t| ChebyshevExpansion::new(t, degree_for(t))).collect::<Result<_>>()?;
    let max_steps = expansions.iter().map(|e| e.d()).max().unwrap_or(0) as usize;
    let mut steps = Vec::with_capacity(cfg.q_size());
    let mut mixture = vec![0.0; 2 * n];
    let mut per_cell = Vec::new();
    let mut calls = CallCounts::default();
    let scale = 1.0 / (tt * cfg.q_size()) as f64;
    for (j, &q_m) in cfg.q_m.iter().enumerate() {
        let comp = inst.composite(c, cfg.q_s, q_m)?;
        calls = comp.op.calls();
        let phi = comp.initial(&inst.sqrt_sigma);
        let dists = comp.step_distributions(&phi, max_steps);
        for (ti, e) in expansions.iter().enumerate() {
            let mut marked = 0.0;
            for (m, cm) in e.coefficients().iter().enumerate() {
                let w = cm / e.alpha();
                let dist = &dists[e.degree_of(m) as usize];
                for (s, p) in dist.iter().enumerate() {
                    mixture[s] += scale * w * p;
                }
                marked += w * marked_embedded(inst, dist);
            }
            per_cell.push(TraceEntry { t: ti + 1, r_m: cfg.r_m[j], value: marked });
        }
        steps.push(dists);
    }
    Ok(Alg2Tables { steps, mixture, per_cell, calls })
}

fn marked_embedded(inst: &SearchInstance, dist: &[f64]) -> f64 {
    let n = inst.modified.base_n;
    (0..n).filter(|&u| inst.m_mask[u]).map(|u| dist[u]).sum()
}

/// Simple search by randomized interpolated walks.
pub fn search_simple(
    c: &ReversibleChain,
    sigma: &Distribution,
    marked: &[usize],
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    check_inputs(c, sigma, marked)?;
    let rc = cfg.resolve(default_budget(c, sigma, marked)?)?;
    let d = discriminant(c)?;
    let inst = SearchInstance::build(c, sigma, marked, rc.budget, d.matrix().clone())?;
    let tt = rc.horizon;
    let tables = alg2_tables(c, &inst, &rc, |t| cap_degree(t, tt))?;
    let p = check_prob(marked_embedded(&inst, &tables.mixture), "single-shot probability")?;

    let mut rng = ChaCha8Rng::seed_from_u64(rc.seed);
    let mut found = None;
    let mut steps_total = 0u64;
    for _ in 0..rc.shots {
        let j = rng.gen_range(0..rc.q_size());
        let t = rng.gen_range(1..=tt as u64);
        let k = OffsetSampler::new(t, cap_degree(t, tt).max(1))?.sample(&mut rng);
        let steps = k.unsigned_abs() as usize;
        steps_total += steps as u64;
        let s = sample_index(&tables.steps[j][steps], &mut rng);
        if s < inst.modified.base_n && inst.m_mask[s] {
            found = Some(s);
            break;
        }
    }
    let mut warnings = inst.warnings.clone();
    if marked.is_empty() {
        warnings.push("M is empty: detection mode, nothing can be found".into());
    }
    Ok(SearchOutcome {
        algorithm: "simple".into(),
        found,
        success_probability: p,
        pre_amplification: p,
        repeated_success: Some(1.0 - (1.0 - p).powi(rc.shots as i32)),
        counters: SearchCounters::from_calls(tables.calls.times(steps_total), rc.shots as u64),
        config: rc,
        trace: tables.per_cell,
        warnings,
    })
}

/// Probability that measuring the vertex register of the fast-forward search's state before
/// amplification yields M (flagged and unflagged parts together).
pub fn fastforward_vertex_marginal(
    c: &ReversibleChain,
    sigma: &Distribution,
    marked: &[usize],
    cfg: &SearchConfig,
) -> Result<f64> {
    check_inputs(c, sigma, marked)?;
    let rc = cfg.resolve(default_budget(c, sigma, marked)?)?;
    let d = discriminant(c)?;
    let inst = SearchInstance::build(c, sigma, marked, rc.budget, d.matrix().clone())?;
    let eps = rc.eps_ff;
    let tables = alg2_tables(c, &inst, &rc, |t| truncation_degree(t, eps).unwrap_or(t))?;
    check_prob(marked_embedded(&inst, &tables.mixture), "vertex marginal")
}

/// Vertex distributions compared in the algorithm-equivalence check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    /// Fast-forward search before amplification: ladder after R, all ancillas traced.
    pub ladder: Vec<f64>,
    /// Simple search: the (r_M, t, k) mixture.
    pub mixture: Vec<f64>,
    pub total_variation: f64,
}

/// the fast-forward search's pre-amplification vertex distribution computed through the
/// literal ladder, against the simple search's mixture, both truncated at the simple-search cap.
pub fn algorithm_equivalence(
    c: &ReversibleChain,
    sigma: &Distribution,
    marked: &[usize],
    cfg: &SearchConfig,
) -> Result<Equivalence> {
    check_inputs(c, sigma, marked)?;
    let rc = cfg.resolve(default_budget(c, sigma, marked)?)?;
    let d = discriminant(c)?;
    let inst = SearchInstance::build(c, sigma, marked, rc.budget, d.matrix().clone())?;
    let tt = rc.horizon;
    let degree_for = |t: u64| cap_degree(t, tt);
    let tables = alg2_tables(c, &inst, &rc, degree_for)?;

    let expansions: Vec<ChebyshevExpansion> =
        (1..=tt as u64).map(|t| ChebyshevExpansion::new(t, degree_for(t))).collect::<Result<_>>()?;
    let ell = expansions.iter().map(|e| e.ell()).max().unwrap_or(1);
    let n = inst.modified.base_n;
    let mut ladder = vec![0.0; 2 * n];
    let scale = 1.0 / (tt * rc.q_size()) as f64;
    for &q_m in &rc.q_m {
        let comp = inst.composite(c, rc.q_s, q_m)?;
        let lad = Ladder::new(comp.op.clone(), ell)?;
        let phi = comp.initial(&inst.sqrt_sigma);
        let inner = phi.len();
        let sectors = lad.sectors();
        // every control value at once; sector m of the output is G^m φ
        let mut x = DVector::zeros(sectors * inner);
        for m in 0..sectors {
            x.rows_mut(m * inner, inner).copy_from(&phi);
        }
        let even = lad.apply(&x);
        let mut odd = even.clone();
        for m in 0..sectors {
            let part = even.rows(m * inner, inner).into_owned();
            odd.rows_mut(m * inner, inner).copy_from(&comp.op.apply(&part));
        }
        let l = comp.op.layout();
        for e in &expansions {
            let src = if e.is_odd() { &odd } else { &even };
            for (m, cm) in e.coefficients().iter().enumerate() {
                let w = scale * cm / e.alpha();
                let part = src.rows(m * inner, inner);
                for a in 0..l.ancilla_dim {
                    for (s, p) in ladder.iter_mut().enumerate() {
                        *p += w * part[l.index(a, s)].powi(2);
                    }
                }
            }
        }
    }
    let tv = 0.5 * ladder.iter().zip(&tables.mixture).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(Equivalence { ladder, mixture: tables.mixture, total_variation: tv })
}

/// t-step search: fast-forward search on P^t with the inner walk fast-forwarded.
pub fn search_tstep(
    c: &ReversibleChain,
    sigma: &Distribution,
    marked: &[usize],
    t_inner: u32,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    if t_inner == 0 {
        return Err(Error::Domain("t_inner must be ≥ 1".into()));
    }
    check_inputs(c, sigma, marked)?;
    let power = chain_power(c, t_inner).chain;
    let rc = cfg.resolve(default_budget(&power, sigma, marked)?)?;
    // outer walk applications, which fix the inner precision
    let max_degree = truncation_degree(rc.horizon as u64, rc.eps_ff)?;
    let tau = ladder_calls(max_degree) * (2 * rc.aa_rounds as u64 + 1);
    let eps_inner = (1.0 / (8.0 * tau as f64)).min(0.5);
    let d = discriminant(c)?;
    let exp = ChebyshevExpansion::for_precision(t_inner as u64, eps_inner)?;
    let block = crate::fast_forward::expansion_block(&d, &exp);
    let inst = SearchInstance::build(&power, sigma, marked, rc.budget, block)?;
    let inner_ladder = if exp.d() <= 1 {
        1
    } else {
        let sectors = 1u64 << exp.ell();
        2 * (sectors - 1) + exp.is_odd() as u64
    };
    let inner = CallCounts { walk: inner_ladder, ..COMPOSITE_BASE_CALLS };
    let mut out = run_fastforward(&inst, &rc, inner, "tstep")?;
    out.warnings.push(format!("t_inner = {t_inner}, inner precision {eps_inner:e}"));
    Ok(out)
}
