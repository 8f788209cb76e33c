//! Invariant suites: every module's identities over the built-in instances
//! plus seeded random ones.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{ExperimentReport, ReportRow};
use crate::classical::boxes::{exhaustive_comb_check, stretch_geometric, BoxLabel, BoxSequence};
use crate::classical::{
    exact_commute_time, exact_expected_return, exact_return_prob, hitting_time_stationary, interpolate_absorbing,
    interpolate_two, set_commute_quantity, stopping_stats, ChainSampler, InterpolationParams,
};
use crate::electric::{
    build_modified_instance, commute_quantity, effective_resistance, flow_energy, overlap_factor,
    stationary_resistance,
};
use crate::error::{Error, Result};
use crate::fast_forward::{walk_power_reflections, ChebyshevExpansion, FastForward};
use crate::graph::{build_chain, chain_power, chain_to_graph, Distribution, ReversibleChain, WeightedGraph};
use crate::instances::{three_path, random_connected_graph, random_distribution_on, random_subset, suite_problems, Problem};
use crate::quantum::{
    discriminant, interpolated_walk_unitary, szegedy_walk, verify_block_encoding, Lambda, ModifiedWalk, SzegedyWalk,
    WalkOperator,
};
use crate::search::{
    algorithm_equivalence, amplitude_amplify, good_probability, norm_vs_joint_probability, search_simple,
    success_probability_profile, SearchConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuiteName {
    Electric,
    Classical,
    Quantum,
    Ffwd,
    Search,
    All,
}

impl std::str::FromStr for SuiteName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "electric" => SuiteName::Electric,
            "classical" => SuiteName::Classical,
            "quantum" => SuiteName::Quantum,
            "ffwd" => SuiteName::Ffwd,
            "search" => SuiteName::Search,
            "all" => SuiteName::All,
            _ => return Err(Error::Config(format!("unknown suite `{s}`"))),
        })
    }
}

impl SuiteName {
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Electric => "electric",
            SuiteName::Classical => "classical",
            SuiteName::Quantum => "quantum",
            SuiteName::Ffwd => "ffwd",
            SuiteName::Search => "search",
            SuiteName::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Record wall time per item; off keeps reports byte-identical.
    pub timing: bool,
}

/// Lowest κ with grid-average success ≥ κ/log₂T seen on the suite instances.
pub const PROFILE_KAPPA: f64 = 0.07;

type Check = fn(u64) -> Result<Vec<ReportRow>>;

const ITEMS: &[(SuiteName, &str, Check)] = &[
    (SuiteName::Electric, "three_path_golden", electric_golden),
    (SuiteName::Electric, "resistance_vs_commute_time", electric_commute_identities),
    (SuiteName::Electric, "flow_optimality", electric_flow_optimality),
    (SuiteName::Electric, "rayleigh_monotonicity", electric_monotonicity),
    (SuiteName::Electric, "modified_instance", electric_modified),
    (SuiteName::Classical, "chain_invariants", classical_chain_invariants),
    (SuiteName::Classical, "return_identities", classical_return_identities),
    (SuiteName::Classical, "stretching_consistency", classical_stretching),
    (SuiteName::Classical, "box_comb", classical_box_comb),
    (SuiteName::Quantum, "block_encodings", quantum_block_encodings),
    (SuiteName::Quantum, "spectrum", quantum_spectrum),
    (SuiteName::Quantum, "interpolated_circuits", quantum_interpolated),
    (SuiteName::Ffwd, "scalar_bound", ffwd_scalar),
    (SuiteName::Ffwd, "operator_bound", ffwd_operator),
    (SuiteName::Ffwd, "reflection_powers", ffwd_reflections),
    (SuiteName::Search, "norm_vs_joint", search_norm_vs_joint),
    (SuiteName::Search, "profile_average", search_profile),
    (SuiteName::Search, "amplification", search_amplification),
    (SuiteName::Search, "algorithm_equivalence", search_equivalence),
    (SuiteName::Search, "determinism", search_determinism),
];

/// Seed of item `index`, derived by counter from the master seed.
pub fn item_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.next_u64()
}

pub fn run_suite(name: SuiteName, seed: u64) -> ExperimentReport {
    run_suite_with(name, SuiteOptions { seed, timing: false })
}

pub fn run_suite_with(name: SuiteName, opts: SuiteOptions) -> ExperimentReport {
    let selected: Vec<(usize, &(SuiteName, &str, Check))> =
        ITEMS.iter().enumerate().filter(|(_, it)| name == SuiteName::All || it.0 == name).collect();
    let results: Vec<Vec<ReportRow>> = selected
        .par_iter()
        .map(|&(i, &(module, label, check))| {
            let seed = item_seed(opts.seed, i);
            let start = Instant::now();
            let rows = match check(seed) {
                Ok(rows) => rows,
                Err(e) => vec![ReportRow::error(module.as_str(), label, &e)],
            };
            let ms = if opts.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            rows.into_iter()
                .map(|mut r| {
                    r.seed = seed;
                    r.wall_ms = ms;
                    r.operation = format!("{}/{}", label, r.operation);
                    r
                })
                .collect()
        })
        .collect();
    let mut report = ExperimentReport::new(&format!("suite {}", name.as_str()), opts.seed);
    report.config = serde_json::json!({ "suite": name.as_str(), "seed": opts.seed, "profile_kappa": PROFILE_KAPPA });
    report.rows = results.into_iter().flatten().collect();
    report
}

struct RandomInstance {
    name: String,
    graph: WeightedGraph,
    chain: ReversibleChain,
    s_set: Vec<usize>,
    marked: Vec<usize>,
}

/// Connected graph on 4..=12 vertices with disjoint nonempty S and M.
fn random_instance(rng: &mut ChaCha8Rng, k: usize) -> Result<RandomInstance> {
    let n = rng.gen_range(4..=12);
    let graph = random_connected_graph(n, 0.3, rng);
    let chain = build_chain(&graph)?;
    let all: Vec<usize> = (0..n).collect();
    let marked = random_subset(&all, rng.gen_range(1..=2), rng);
    let rest: Vec<usize> = all.iter().copied().filter(|u| !marked.contains(u)).collect();
    let s_set = random_subset(&rest, rng.gen_range(1..=rest.len().min(3)), rng);
    Ok(RandomInstance { name: format!("random{k}_n{n}"), graph, chain, s_set, marked })
}

fn finite(e: crate::classical::Expectation, what: &str) -> Result<f64> {
    e.finite().ok_or_else(|| Error::Integrity(format!("{what} is infinite")))
}

fn electric_golden(_seed: u64) -> Result<Vec<ReportRow>> {
    let p = three_path();
    let c = build_chain(&p.graph)?;
    let s_set = p.sigma.support();
    let r = effective_resistance(&p.graph, &p.sigma, &p.marked)?.value;
    let cq = commute_quantity(&p.graph, &p.sigma, &p.marked)?;
    let st = stopping_stats(&c, &s_set, &p.marked, &p.sigma)?;
    let e = finite(st.commute_time, "E(τ^M_S)")?;
    Ok(vec![
        ReportRow::equal("appA", "R_(pi|S,M)", r, 10.0 / 9.0, 1e-9),
        ReportRow::equal("appA", "C_(pi|S,M)", cq, 40.0 / 9.0, 1e-9),
        ReportRow::equal("appA", "Pr(tau_M<tau_S+)", st.return_probability, 1.0 / 3.0, 1e-9),
        ReportRow::equal("appA", "E(tau^M_S)", e, 13.0 / 3.0, 1e-9),
        ReportRow::strictly_less("appA", "E(tau^M_S) < W*R", e, cq),
    ])
}

fn electric_commute_identities(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for k in 0..20 {
        let ri = random_instance(&mut rng, k)?;
        let n = ri.graph.n();
        let w = ri.graph.total_weight();
        let s = ri.s_set[0];
        let point = Distribution::point(n, s)?;
        let es = finite(exact_commute_time(&ri.chain, &[s], &ri.marked, &point)?, "E_s(τ^M_s)")?;
        let wr = w * effective_resistance(&ri.graph, &point, &ri.marked)?.value;
        rows.push(ReportRow::relative(&ri.name, "W*R_(s,M) = E_s(tau^M_s)", wr, es, 1e-8));
        let ht = finite(hitting_time_stationary(&ri.chain, &ri.marked)?, "HT")?;
        let wrpi = w * stationary_resistance(&ri.graph, &ri.marked)?.value;
        rows.push(ReportRow::relative(&ri.name, "W*R_(pi,M) = HT(P,M)", wrpi, ht, 1e-8));
    }
    Ok(rows)
}

/// A random circulation around the cycle closed by one non-tree edge.
fn random_circulation(g: &WeightedGraph, rng: &mut ChaCha8Rng) -> Option<DMatrix<f64>> {
    let n = g.n();
    let mut parent = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    let mut order = vec![0];
    parent[0] = 0;
    let mut i = 0;
    while i < order.len() {
        let u = order[i];
        for v in g.neighbors(u) {
            if parent[v] == usize::MAX {
                parent[v] = u;
                depth[v] = depth[u] + 1;
                order.push(v);
            }
        }
        i += 1;
    }
    let mut extra = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if g.weight(u, v) > 0.0 && parent[v] != u && parent[u] != v {
                extra.push((u, v));
            }
        }
    }
    if extra.is_empty() {
        return None;
    }
    let (a, b) = extra[rng.gen_range(0..extra.len())];
    let delta = rng.gen_range(0.01..0.2);
    let mut f = DMatrix::zeros(n, n);
    let mut push = |u: usize, v: usize| {
        f[(u, v)] += delta;
        f[(v, u)] -= delta;
    };
    // a → b, then back along the tree b → lca → a
    push(a, b);
    let (mut x, mut y) = (b, a);
    let mut down = Vec::new();
    while x != y {
        if depth[x] >= depth[y] {
            push(x, parent[x]);
            x = parent[x];
        } else {
            down.push((parent[y], y));
            y = parent[y];
        }
    }
    for (u, v) in down.into_iter().rev() {
        push(u, v);
    }
    Some(f)
}

fn electric_flow_optimality(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for k in 0..10 {
        let ri = random_instance(&mut rng, k)?;
        let g = &ri.graph;
        let n = g.n();
        let sigma = random_distribution_on(n, &ri.s_set, &mut rng);
        let res = effective_resistance(g, &sigma, &ri.marked)?;
        let flow = res.flow.flow();
        let phi = res.flow.potentials();
        let mut cycle = 0.0f64;
        for u in 0..n {
            for v in 0..n {
                if u != v {
                    cycle = cycle.max((flow[(u, v)] - g.weight(u, v) * (phi[u] - phi[v])).abs());
                }
            }
        }
        rows.push(ReportRow::equal(&ri.name, "cycle law: p = w*(phi_u - phi_v)", cycle, 0.0, 1e-10));
        rows.push(ReportRow::equal(&ri.name, "conservation", res.flow.conservation_residual(), 0.0, 1e-10));
        rows.push(ReportRow::relative(&ri.name, "energy = R", res.flow.energy(g), res.value, 1e-10));
        if let Some(c) = random_circulation(g, &mut rng) {
            let perturbed = flow + c;
            let e1 = flow_energy(g, &perturbed);
            rows.push(ReportRow::strictly_less(&ri.name, "energy < perturbed energy", res.value, e1));
        }
    }
    Ok(rows)
}

fn electric_monotonicity(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for k in 0..10 {
        let ri = random_instance(&mut rng, k)?;
        let n = ri.graph.n();
        let sigma = random_distribution_on(n, &ri.s_set, &mut rng);
        let before = effective_resistance(&ri.graph, &sigma, &ri.marked)?.value;
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let g2 = ri.graph.with_edge_added(u, v, rng.gen_range(0.1..3.0))?;
        let after = effective_resistance(&g2, &sigma, &ri.marked)?.value;
        rows.push(ReportRow::at_most(&ri.name, &format!("R after adding ({u},{v}) <= R"), after, before, 1e-12 * before));
    }
    Ok(rows)
}

fn electric_modified(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for k in 0..20 {
        let ri = random_instance(&mut rng, k)?;
        let n = ri.graph.n();
        let sigma = random_distribution_on(n, &ri.s_set, &mut rng);
        let budget = rng.gen_range(0.5..20.0);
        let mi = build_modified_instance(&ri.graph, &sigma, &ri.marked, budget)?;
        let pi_s: f64 = mi.source_prime.iter().map(|&u| mi.graph.stationary().get(u)).sum();
        rows.push(ReportRow::equal(&ri.name, "pi'(S') = 1/(C+2)", pi_s, 1.0 / (budget + 2.0), 1e-12));
        let support = sigma.support();
        let rho_set = random_subset(&support, rng.gen_range(1..=support.len()), &mut rng);
        let rho = random_distribution_on(n, &rho_set, &mut rng);
        let p = overlap_factor(&rho, &sigma)?;
        let c_rho = commute_quantity(&ri.graph, &rho, &ri.marked)?;
        let lhs = commute_quantity(&mi.graph, &mi.lift(&rho)?, &mi.marked_prime)?;
        let rhs = (c_rho / budget + 1.0 / p) * (budget + 2.0);
        rows.push(ReportRow::relative(&ri.name, "C'_(rho',M') = (C_(rho,M)/C + 1/p)(C+2)", lhs, rhs, 1e-9));
    }
    Ok(rows)
}

fn classical_chain_invariants(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chains: Vec<(String, ReversibleChain)> = Vec::new();
    for p in suite_problems() {
        chains.push((p.name.clone(), build_chain(&p.graph)?));
    }
    for k in 0..10 {
        let ri = random_instance(&mut rng, k)?;
        chains.push((ri.name, ri.chain));
    }
    let mut rows = Vec::new();
    for (name, c) in &chains {
        rows.push(ReportRow::equal(name, "row sums", c.row_sum_residual(), 0.0, 1e-12));
        rows.push(ReportRow::equal(name, "detailed balance", c.detailed_balance_residual(), 0.0, 1e-12));
        rows.push(ReportRow::equal(name, "pi P = pi", c.stationarity_residual(), 0.0, 1e-12));
        let d = discriminant(c)?;
        let top = d.eigenvalues().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        rows.push(ReportRow::at_most(name, "spectrum in [-1,1]", top, 1.0, 1e-12));
        let back = build_chain(&chain_to_graph(c)?)?;
        let diff = (back.transition() - c.transition()).amax();
        rows.push(ReportRow::equal(name, "build_chain(chain_to_graph(P)) = P", diff, 0.0, 1e-12));
        let (s, t) = (rng.gen_range(1..6u32), rng.gen_range(1..6u32));
        let lhs = chain_power(c, s + t).chain;
        let rhs = chain_power(c, s).chain.transition() * chain_power(c, t).chain.transition();
        rows.push(ReportRow::equal(name, &format!("P^{} = P^{s} P^{t}", s + t), (lhs.transition() - rhs).amax(), 0.0, 1e-10));
    }
    Ok(rows)
}

fn classical_return_identities(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for k in 0..20 {
        let ri = random_instance(&mut rng, k)?;
        let c = &ri.chain;
        let pi = c.stationary();
        let pis: f64 = ri.s_set.iter().map(|&u| pi[u]).sum();
        let pr = exact_return_prob(c, &ri.s_set, &ri.marked)?;
        let csm = set_commute_quantity(c, &ri.s_set, &ri.marked)?;
        rows.push(ReportRow::equal(&ri.name, "Pr*C_(S,M)*pi(S) = 1", pr * csm * pis, 1.0, 1e-8));
        let s = ri.s_set[0];
        let prs = exact_return_prob(c, &[s], &ri.marked)?;
        let point = Distribution::point(c.n(), s)?;
        let es = finite(exact_commute_time(c, &[s], &ri.marked, &point)?, "E_s(τ^M_s)")?;
        rows.push(ReportRow::equal(&ri.name, "Pr_s*E_s(tau^M_s)*pi_s = 1", prs * es * pi[s], 1.0, 1e-8));
        rows.push(ReportRow::equal(&ri.name, "Kac: E(tau_S+)*pi(S) = 1", exact_expected_return(c, &ri.s_set)? * pis, 1.0, 1e-9));
    }
    Ok(rows)
}

const STRETCH_BINS: usize = 12;

fn hit_bin(y: &BoxSequence, label: BoxLabel) -> usize {
    let idx = match label {
        BoxLabel::M => y.hitting_index(),
        _ => y.commute_index(),
    };
    idx.map_or(STRETCH_BINS - 1, |i| (i / 2).min(STRETCH_BINS - 2))
}

/// Two-sample chi-square with equal sample sizes; returns (statistic, 1% critical value).
fn two_sample_chi2(a: &[usize], b: &[usize]) -> Result<(f64, f64)> {
    let mut stat = 0.0;
    let mut bins = 0;
    for (&x, &y) in a.iter().zip(b) {
        if x + y > 0 {
            stat += (x as f64 - y as f64).powi(2) / (x + y) as f64;
            bins += 1;
        }
    }
    let crit = ChiSquared::new((bins.max(2) - 1) as f64)
        .map_err(|e| Error::Domain(e.to_string()))?
        .inverse_cdf(0.99);
    Ok((stat, crit))
}

/// Box patterns of P(q) against geometric stretches of P's patterns.
fn classical_stretching(seed: u64) -> Result<Vec<ReportRow>> {
    let p = three_path();
    let c = build_chain(&p.graph)?;
    let s_set = p.sigma.support();
    let mut s_mask = vec![false; c.n()];
    let mut m_mask = vec![false; c.n()];
    s_set.iter().for_each(|&u| s_mask[u] = true);
    p.marked.iter().for_each(|&u| m_mask[u] = true);
    let (r_s, r_m) = (2.0, 3.0);
    let q = InterpolationParams::from_holding(r_s, r_m)?;
    let pq = interpolate_two(&c, &s_set, &p.marked, q)?;
    let start = Distribution::restricted(c.stationary().as_slice(), &s_set)?;
    let base = ChainSampler::new(&c);
    let held = ChainSampler::new(&pq);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trials = 20_000;
    let len = 2 * STRETCH_BINS;
    let walk = |sampler: &ChainSampler, steps: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        let mut u = crate::classical::sample_from(&start, rng);
        let mut out = vec![u];
        for _ in 1..steps {
            u = sampler.step(u, rng);
            out.push(u);
        }
        out
    };
    let mut rows = Vec::new();
    for (label, what) in [(BoxLabel::M, "hitting index"), (BoxLabel::S, "commute index")] {
        let mut direct = vec![0usize; STRETCH_BINS];
        let mut stretched = vec![0usize; STRETCH_BINS];
        for _ in 0..trials {
            let y = BoxSequence::from_trajectory(&walk(&held, len, &mut rng), &s_mask, &m_mask)?;
            direct[hit_bin(&y, label)] += 1;
            // every base box stretches to at least one box, so len base steps suffice
            let y0 = BoxSequence::from_trajectory(&walk(&base, len, &mut rng), &s_mask, &m_mask)?;
            let ys = stretch_geometric(&y0, r_s, r_m, &mut rng)?;
            let cut = BoxSequence::new(ys.labels()[..len.min(ys.len())].to_vec())?;
            stretched[hit_bin(&cut, label)] += 1;
        }
        let (stat, crit) = two_sample_chi2(&direct, &stretched)?;
        rows.push(ReportRow::at_most("appA", &format!("chi2 {what}: P(q) vs stretched P"), stat, crit, 0.0));
    }
    Ok(rows)
}

fn classical_box_comb(_seed: u64) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for t in [4usize, 8] {
        let (checked, bad) = exhaustive_comb_check(t, 12)?;
        rows.push(ReportRow::info(&format!("T={t}"), "sequences meeting hypotheses (len <= 12)", checked as f64));
        rows.push(ReportRow::equal(&format!("T={t}"), "counterexamples", bad as f64, 0.0, 0.0));
    }
    Ok(rows)
}

fn small_chains(seed: u64, count: usize, max_n: usize) -> Vec<(String, Problem)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(String, Problem)> = suite_problems().into_iter().map(|p| (p.name.clone(), p)).collect();
    for k in 0..count {
        let n = rng.gen_range(3..=max_n);
        let graph = random_connected_graph(n, 0.4, &mut rng);
        let sigma = random_distribution_on(n, &[0, 1], &mut rng);
        let name = format!("random{k}_n{n}");
        out.push((name.clone(), Problem { name, graph, sigma, marked: vec![n - 1] }));
    }
    out
}

fn mask_of(n: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    set.iter().for_each(|&u| m[u] = true);
    m
}

fn quantum_block_encodings(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for (name, p) in small_chains(seed, 5, 10) {
        let c = build_chain(&p.graph)?;
        let d = discriminant(&c)?;
        let w = szegedy_walk(&c)?;
        rows.push(ReportRow::equal(&name, "Szegedy block = D(P)", verify_block_encoding(&w, d.matrix())?, 0.0, 1e-10));
        let marked = mask_of(c.n(), &p.marked);
        for s in [0.0, 0.25, 0.5, 0.9] {
            let ws = interpolated_walk_unitary(&w, &marked, s)?;
            let target = discriminant(&interpolate_absorbing(&c, &p.marked, s)?)?;
            let dev = verify_block_encoding(&ws, target.matrix())?;
            rows.push(ReportRow::equal(&name, &format!("interpolated s={s} block = D(P(s))"), dev, 0.0, 1e-10));
        }
        let budget = commute_quantity(&p.graph, &p.sigma, &p.marked)?;
        let mi = build_modified_instance(&p.graph, &p.sigma, &p.marked, budget)?;
        let op = ModifiedWalk::new(
            Arc::new(SzegedyWalk::new(&c)?),
            Lambda::new(&p.sigma, c.stationary().as_slice(), budget)?,
        )?;
        let dm = discriminant(&build_chain(&mi.graph)?)?;
        let emb = mi.system_embedding();
        let mut target = DMatrix::zeros(2 * mi.base_n, 2 * mi.base_n);
        for (i, &a) in emb.iter().enumerate() {
            for (j, &b) in emb.iter().enumerate() {
                target[(a, b)] = dm.matrix()[(i, j)];
            }
        }
        rows.push(ReportRow::equal(&name, "modified walk block = D(P')", verify_block_encoding(&op, &target)?, 0.0, 1e-10));
    }
    Ok(rows)
}

fn quantum_spectrum(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for (name, p) in small_chains(seed, 5, 12) {
        let c = build_chain(&p.graph)?;
        let d = discriminant(&c)?;
        // power sums tr(P^k) = Σλ^k, k ≤ n, fix the spectrum
        let eig = d.eigenvalues();
        let mut pk = DMatrix::identity(c.n(), c.n());
        let mut dev = 0.0f64;
        for k in 1..=c.n() as i32 {
            pk = &pk * c.transition();
            dev = dev.max((pk.trace() - eig.iter().map(|x| x.powi(k)).sum::<f64>()).abs());
        }
        rows.push(ReportRow::equal(&name, "eig D(P) = eig P (power sums)", dev, 0.0, 1e-10));
        let sp = c.stationary().map(f64::sqrt);
        for t in [1u32, 2, 7, 30] {
            let v = d.apply_fn(|x| x.powi(t as i32), &sp);
            rows.push(ReportRow::equal(&name, &format!("D^{t} sqrt(pi) = sqrt(pi)"), (v - &sp).amax(), 0.0, 1e-10));
        }
    }
    Ok(rows)
}

fn quantum_interpolated(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for (name, p) in small_chains(seed, 4, 8) {
        let c = build_chain(&p.graph)?;
        let n = c.n();
        let s_set = p.sigma.support();
        let w = szegedy_walk(&c)?;
        for (qs, qm) in [(0.3, 0.6), (0.75, 0.0), (0.5, 0.9)] {
            let inner = interpolated_walk_unitary(&w, &mask_of(n, &s_set), qs)?;
            let both = interpolated_walk_unitary(&inner, &mask_of(n, &p.marked), qm)?;
            let target = discriminant(&interpolate_two(&c, &s_set, &p.marked, InterpolationParams::new(qs, qm)?)?)?;
            let dev = verify_block_encoding(&both, target.matrix())?;
            rows.push(ReportRow::equal(&name, &format!("S then M holding q=({qs},{qm}) = D(P(q))"), dev, 0.0, 1e-10));
        }
    }
    Ok(rows)
}

fn ffwd_scalar(_seed: u64) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let grid = 4000;
    for t in [1u64, 2, 3, 5, 8, 13, 32, 64, 100, 128, 255, 256] {
        for eps in [1e-1, 1e-2, 1e-3] {
            let e = ChebyshevExpansion::for_precision(t, eps)?;
            let mut worst = 0.0f64;
            for i in 0..=grid {
                let x = -1.0 + 2.0 * i as f64 / grid as f64;
                worst = worst.max((e.eval(x)? - x.powi(t as i32)).abs());
            }
            rows.push(ReportRow::at_most(&format!("t={t}"), &format!("grid max |x^t - p| at eps={eps}"), worst, eps, 0.0));
        }
    }
    Ok(rows)
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5).normalize()
}

/// The bound table across (t, eps) for the matrix-free fast-forward circuit.
fn ffwd_operator(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=6);
    let c = build_chain(&random_connected_graph(n, 0.5, &mut rng))?;
    let d = discriminant(&c)?;
    let name = format!("random_n{n}");
    let mut rows = Vec::new();
    for t in [2u64, 8, 32, 64] {
        for eps in [1e-1, 1e-2] {
            let ff = FastForward::new(Arc::new(SzegedyWalk::new(&c)?), t, eps)?;
            let blk = ff.block();
            let mut worst = 0.0f64;
            for _ in 0..5 {
                let psi = random_unit(n, &mut rng);
                let exact = d.apply_fn(|x| x.powi(t as i32), &psi);
                worst = worst.max((&blk * &psi - exact).norm_squared());
            }
            rows.push(ReportRow::at_most(&name, &format!("t={t} eps={eps}: ||block psi - D^t psi||^2 <= eps"), worst, eps, 0.0));
            let bound = 4.0 * (2.0 * t as f64 * (2.0 / eps).ln()).sqrt().ceil() + 4.0;
            rows.push(ReportRow::at_most(&name, &format!("t={t} eps={eps}: walk calls"), ff.calls().walk as f64, bound, 0.0));
        }
    }
    Ok(rows)
}

fn ffwd_reflections(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for k in 0..3 {
        let n = rng.gen_range(3..=6);
        let c = build_chain(&random_connected_graph(n, 0.5, &mut rng))?;
        let name = format!("random{k}_n{n}");
        let w = szegedy_walk(&c)?;
        let d = discriminant(&c)?;
        let blocks: Vec<DMatrix<f64>> = (0..=8u32).map(|m| walk_power_reflections(&w, m).map(|g| g.block())).collect::<Result<_>>()?;
        for (m, b) in blocks.iter().enumerate() {
            let want = d.function_matrix(|x| (2.0 * m as f64 * x.clamp(-1.0, 1.0).acos()).cos());
            rows.push(ReportRow::equal(&name, &format!("(Ref W^T Ref W)^{m} block = T_{}(D)", 2 * m), (b - want).amax(), 0.0, 1e-9));
        }
        let t2 = d.matrix() * d.matrix() * 2.0 - DMatrix::identity(n, n);
        for m in 1..8 {
            let rec = &t2 * &blocks[m] * 2.0 - &blocks[m - 1];
            rows.push(ReportRow::equal(&name, &format!("three-term recurrence at {m}"), (rec - &blocks[m + 1]).amax(), 0.0, 1e-8));
        }
    }
    Ok(rows)
}

fn search_norm_vs_joint(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for k in 0..20 {
        let ri = random_instance(&mut rng, k)?;
        let sigma = Distribution::restricted(ri.chain.stationary().as_slice(), &ri.s_set)?;
        let budget = commute_quantity(&ri.graph, &sigma, &ri.marked)? * rng.gen_range(1.0..2.0);
        let mi = build_modified_instance(&ri.graph, &sigma, &ri.marked, budget)?;
        let c = build_chain(&mi.graph)?;
        let q = InterpolationParams::new(rng.gen_range(0.0..0.95), rng.gen_range(0.0..0.95))?;
        let t = rng.gen_range(1..20u32);
        let t_later = t + rng.gen_range(1..20u32);
        let (lhs, rhs) = norm_vs_joint_probability(&c, &mi.source_prime, &mi.marked_prime, q, t, t_later)?;
        rows.push(ReportRow::at_most(&ri.name, &format!("Pr(Y_{t} in M, Y_{t_later} in S) <= ||Pi_M D^t sqrt(sigma)||"), rhs, lhs, 1e-10));
    }
    Ok(rows)
}

fn search_profile(_seed: u64) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for p in suite_problems() {
        let c0 = commute_quantity(&p.graph, &p.sigma, &p.marked)?;
        for f in [1.0, 2.0] {
            let mi = build_modified_instance(&p.graph, &p.sigma, &p.marked, f * c0)?;
            let c = build_chain(&mi.graph)?;
            let cp = commute_quantity(&mi.graph, &mi.sigma_prime, &mi.marked_prime)?;
            let t = ((4.0 * cp).ceil() as usize + 1) & !1;
            let rc = SearchConfig::new(t, 0).resolve(f * c0)?;
            let prof = success_probability_profile(&c, &mi.source_prime, &mi.marked_prime, &rc)?;
            let lower = PROFILE_KAPPA / (t as f64).log2();
            rows.push(ReportRow::at_most(&p.name, &format!("C={f}*C_(sigma,M) T={t}: kappa/log2 T <= average"), lower, prof.average, 0.0));
        }
    }
    Ok(rows)
}

fn search_amplification(seed: u64) -> Result<Vec<ReportRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for k in 0..10 {
        let n = rng.gen_range(4..40);
        let x = random_unit(n, &mut rng);
        let good: Vec<bool> = (0..n).map(|i| i == 0 || rng.gen_bool(0.2)).collect();
        let p = good_probability(&x, &good);
        let theta = p.sqrt().asin();
        for rounds in [1u32, 2, 5] {
            let out = amplitude_amplify(&x, &good, rounds)?;
            let want = ((2 * rounds + 1) as f64 * theta).sin().powi(2);
            rows.push(ReportRow::equal(&format!("random{k}_n{n}"), &format!("{rounds} rounds: sin^2 law"), good_probability(&out, &good), want, 1e-10));
        }
    }
    Ok(rows)
}

fn search_equivalence(_seed: u64) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for p in suite_problems().into_iter().filter(|p| p.graph.n() <= 8) {
        let c = build_chain(&p.graph)?;
        let eq = algorithm_equivalence(&c, &p.sigma, &p.marked, &SearchConfig::new(16, 0))?;
        rows.push(ReportRow::equal(&p.name, "T=16: TV(ladder, mixture)", eq.total_variation, 0.0, 1e-8));
    }
    Ok(rows)
}

fn search_determinism(seed: u64) -> Result<Vec<ReportRow>> {
    let p = three_path();
    let c = build_chain(&p.graph)?;
    let cfg = SearchConfig::new(16, seed);
    let a = search_simple(&c, &p.sigma, &p.marked, &cfg)?;
    let b = search_simple(&c, &p.sigma, &p.marked, &cfg)?;
    let same = serde_json::to_string(&a).ok() == serde_json::to_string(&b).ok();
    Ok(vec![ReportRow::equal("appA", "same seed, same outcome", (!same) as u8 as f64, 0.0, 0.0)])
}
