//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every line is printed; exits nonzero if any criterion fails.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qwsearch::classical::boxes::exhaustive_comb_check;
use qwsearch::classical::{
    check_claim_commute, exact_commute_time, exact_expected_return, exact_return_prob, hitting_time_stationary,
    interpolate_absorbing, set_commute_quantity, stopping_stats, InterpolationParams,
};
use qwsearch::electric::{
    build_modified_instance, commute_quantity, effective_resistance, overlap_factor, stationary_resistance,
};
use qwsearch::fast_forward::{truncation_degree, walk_power_reflections, ChebyshevExpansion, FastForward};
use qwsearch::graph::{build_chain, chain_power, chain_to_graph, spectral_gap, Distribution, WeightedGraph};
use qwsearch::instances::{
    three_path, k5_loops, random_connected_graph, random_distribution_on, random_subset, suite_problems,
};
use qwsearch::quantum::{
    discriminant, interpolated_walk_unitary, szegedy_walk, verify_block_encoding, Lambda, ModifiedWalk, SzegedyWalk,
    WalkOperator,
};
use qwsearch::search::{
    algorithm_equivalence, norm_vs_joint_probability, search_fastforward, search_fastforward_sweep, search_simple,
    search_tstep, SearchConfig,
};
use qwsearch::Result;

#[derive(serde::Deserialize)]
struct Baselines {
    alg2_kappa_prime: f64,
    profile_kappa: f64,
    unique_marked_c: f64,
}

fn baselines() -> Baselines {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/baselines.json");
    serde_json::from_str(&std::fs::read_to_string(path).expect("baselines file")).expect("baselines json")
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

struct Random {
    graph: WeightedGraph,
    s_set: Vec<usize>,
    marked: Vec<usize>,
}

/// Connected graphs with n ≤ 12 and disjoint nonempty S, M.
fn random_suite(count: usize, seed: u64) -> Vec<Random> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(4..=12);
            let graph = random_connected_graph(n, 0.3, &mut rng);
            let all: Vec<usize> = (0..n).collect();
            let marked = random_subset(&all, rng.gen_range(1..=2), &mut rng);
            let rest: Vec<usize> = all.iter().copied().filter(|u| !marked.contains(u)).collect();
            let s_set = random_subset(&rest, rng.gen_range(1..=rest.len().min(3)), &mut rng);
            Random { graph, s_set, marked }
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1() -> Result<Verdict> {
    let p = three_path();
    let c = build_chain(&p.graph)?;
    let r = effective_resistance(&p.graph, &p.sigma, &p.marked)?.value;
    let cq = commute_quantity(&p.graph, &p.sigma, &p.marked)?;
    let st = stopping_stats(&c, &p.sigma.support(), &p.marked, &p.sigma)?;
    let e = st.commute_time.finite().unwrap_or(f64::INFINITY);
    let res = [
        (r - 10.0 / 9.0).abs(),
        (cq - 40.0 / 9.0).abs(),
        (st.return_probability - 1.0 / 3.0).abs(),
        (e - 13.0 / 3.0).abs(),
    ];
    let worst = res.iter().copied().fold(0.0, f64::max);
    verdict(
        worst <= 1e-9 && e < cq,
        format!("R={r:.12} C={cq:.12} Pr={:.12} E={e:.12}; max residual {worst:.1e} (tol 1e-9); E < C: {}", st.return_probability, e < cq),
    )
}

fn c2() -> Result<Verdict> {
    let mut worst_s = 0.0f64;
    let mut worst_pi = 0.0f64;
    for ri in random_suite(50, 2) {
        let g = &ri.graph;
        let c = build_chain(g)?;
        let n = g.n();
        let w = g.total_weight();
        let s = ri.s_set[0];
        let point = Distribution::point(n, s)?;
        let es = exact_commute_time(&c, &[s], &ri.marked, &point)?.finite().unwrap_or(f64::INFINITY);
        worst_s = worst_s.max(rel(w * effective_resistance(g, &point, &ri.marked)?.value, es));
        let ht = hitting_time_stationary(&c, &ri.marked)?.finite().unwrap_or(f64::INFINITY);
        worst_pi = worst_pi.max(rel(w * stationary_resistance(g, &ri.marked)?.value, ht));
    }
    verdict(
        worst_s <= 1e-8 && worst_pi <= 1e-8,
        format!("50 graphs: max rel |WR_s,M - E_s| = {worst_s:.1e}, |WR_pi,M - HT| = {worst_pi:.1e} (tol 1e-8)"),
    )
}

fn c3() -> Result<Verdict> {
    let mut worst_l = 0.0f64;
    let mut worst_k = 0.0f64;
    for ri in random_suite(50, 2) {
        let c = build_chain(&ri.graph)?;
        let pis: f64 = ri.s_set.iter().map(|&u| c.stationary()[u]).sum();
        let pr = exact_return_prob(&c, &ri.s_set, &ri.marked)?;
        let csm = set_commute_quantity(&c, &ri.s_set, &ri.marked)?;
        worst_l = worst_l.max((pr * csm * pis - 1.0).abs());
        worst_k = worst_k.max((exact_expected_return(&c, &ri.s_set)? * pis - 1.0).abs());
    }
    verdict(
        worst_l <= 1e-8 && worst_k <= 1e-8,
        format!("50 graphs: max |Pr*C_S,M*pi(S) - 1| = {worst_l:.1e}, |E(tau_S+)*pi(S) - 1| = {worst_k:.1e} (tol 1e-8)"),
    )
}

fn c4() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_pi = 0.0f64;
    let mut worst_c = 0.0f64;
    for ri in random_suite(20, 4) {
        let n = ri.graph.n();
        let sigma = random_distribution_on(n, &ri.s_set, &mut rng);
        let budget = rng.gen_range(0.5..20.0);
        let mi = build_modified_instance(&ri.graph, &sigma, &ri.marked, budget)?;
        let pi = mi.graph.stationary();
        let pis: f64 = mi.source_prime.iter().map(|&u| pi.get(u)).sum();
        worst_pi = worst_pi.max((pis - 1.0 / (budget + 2.0)).abs());
        let support = sigma.support();
        let rho_set = random_subset(&support, rng.gen_range(1..=support.len()), &mut rng);
        let rho = random_distribution_on(n, &rho_set, &mut rng);
        let p = overlap_factor(&rho, &sigma)?;
        let lhs = commute_quantity(&mi.graph, &mi.lift(&rho)?, &mi.marked_prime)?;
        let rhs = (commute_quantity(&ri.graph, &rho, &ri.marked)? / budget + 1.0 / p) * (budget + 2.0);
        worst_c = worst_c.max(rel(lhs, rhs));
    }
    verdict(
        worst_pi <= 1e-12 && worst_c <= 1e-9,
        format!("20 instances: max |pi'(S') - 1/(C+2)| = {worst_pi:.1e} (tol 1e-12), rel C' error {worst_c:.1e} (tol 1e-9)"),
    )
}

fn c5() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut problems = suite_problems();
    for _ in 0..5 {
        let n = rng.gen_range(3..=10);
        let graph = random_connected_graph(n, 0.4, &mut rng);
        let sigma = random_distribution_on(n, &[0, 1], &mut rng);
        problems.push(qwsearch::instances::Problem { name: "random".into(), graph, sigma, marked: vec![n - 1] });
    }
    let mut worst = [0.0f64; 3];
    let mut count = 0;
    for p in &problems {
        let c = build_chain(&p.graph)?;
        let n = c.n();
        let d = discriminant(&c)?;
        let w = szegedy_walk(&c)?;
        worst[0] = worst[0].max(verify_block_encoding(&w, d.matrix())?);
        let mut mask = vec![false; n];
        p.marked.iter().for_each(|&u| mask[u] = true);
        for s in [0.0, 0.25, 0.5, 0.9] {
            let ws = interpolated_walk_unitary(&w, &mask, s)?;
            let target = discriminant(&interpolate_absorbing(&c, &p.marked, s)?)?;
            worst[1] = worst[1].max(verify_block_encoding(&ws, target.matrix())?);
        }
        let budget = commute_quantity(&p.graph, &p.sigma, &p.marked)?;
        for b in [budget, 2.0 * budget] {
            let mi = build_modified_instance(&p.graph, &p.sigma, &p.marked, b)?;
            let op = ModifiedWalk::new(Arc::new(SzegedyWalk::new(&c)?), Lambda::new(&p.sigma, c.stationary().as_slice(), b)?)?;
            let dm = discriminant(&build_chain(&mi.graph)?)?;
            let emb = mi.system_embedding();
            let mut target = DMatrix::zeros(2 * n, 2 * n);
            for (i, &a) in emb.iter().enumerate() {
                for (j, &bb) in emb.iter().enumerate() {
                    target[(a, bb)] = dm.matrix()[(i, j)];
                }
            }
            worst[2] = worst[2].max(verify_block_encoding(&op, &target)?);
        }
        count += 1;
    }
    verdict(
        worst.iter().all(|&x| x <= 1e-10),
        format!(
            "{count} chains (n <= 10): Szegedy {:.1e}, interpolated {:.1e}, modified {:.1e} (tol 1e-10)",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn cheb(k: u64, x: f64) -> f64 {
    (k as f64 * x.clamp(-1.0, 1.0).acos()).cos()
}

fn c6() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..8 {
        let n = rng.gen_range(2..=6);
        let c = build_chain(&random_connected_graph(n, 0.5, &mut rng))?;
        let w = szegedy_walk(&c)?;
        let d = discriminant(&c)?;
        for m in 0..=8u32 {
            let g = walk_power_reflections(&w, m)?;
            let want = d.function_matrix(|x| cheb(2 * m as u64, x));
            worst = worst.max((g.block() - want).amax());
        }
    }
    verdict(worst < 1e-9, format!("8 chains, n <= 8: max |block - T_2n(D)| = {worst:.1e} (tol 1e-9)"))
}

fn c7() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 5;
    let c = build_chain(&random_connected_graph(n, 0.5, &mut rng))?;
    let d = discriminant(&c)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for t in [8u64, 32, 64] {
        for eps in [1e-1, 1e-2] {
            let ff = FastForward::new(Arc::new(SzegedyWalk::new(&c)?), t, eps)?;
            let blk = ff.block();
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let psi = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5).normalize();
                let exact = d.apply_fn(|x| x.powi(t as i32), &psi);
                worst = worst.max((&blk * &psi - exact).norm());
            }
            let calls = ff.calls().walk;
            let bound = 4 * (2.0 * t as f64 * (2.0 / eps).ln()).sqrt().ceil() as u64 + 4;
            ok &= worst <= 2.0 * eps && calls <= bound;
            parts.push(format!("t={t},eps={eps}: {worst:.1e}, calls {calls}/{bound}"));
        }
    }
    verdict(ok, format!("error <= 2 eps: {}", parts.join("; ")))
}

fn c8() -> Result<Verdict> {
    let grid = 2000;
    let results: Vec<Result<(u64, f64, f64)>> = (1..=256u64)
        .into_par_iter()
        .flat_map_iter(|t| [1e-1, 1e-2, 1e-3].into_iter().map(move |eps| (t, eps)))
        .map(|(t, eps)| {
            let d = truncation_degree(t, eps)?;
            let e = ChebyshevExpansion::new(t, d)?;
            let mut worst = 0.0f64;
            for i in 0..=grid {
                let x = -1.0 + 2.0 * i as f64 / grid as f64;
                worst = worst.max((e.eval(x)? - x.powi(t as i32)).abs());
            }
            Ok((t, eps, worst / eps))
        })
        .collect();
    let mut worst_ratio = 0.0f64;
    let mut at = (0, 0.0);
    for r in results {
        let (t, eps, ratio) = r?;
        if ratio > worst_ratio {
            worst_ratio = ratio;
            at = (t, eps);
        }
    }
    verdict(
        worst_ratio <= 1.0,
        format!("t <= 256, eps in {{1e-1,1e-2,1e-3}}: max error/eps = {worst_ratio:.3} at t={}, eps={}", at.0, at.1),
    )
}

fn c9() -> Result<Verdict> {
    let mut parts = Vec::new();
    let mut bad_total = 0;
    for t in [4usize, 8] {
        let (checked, bad) = exhaustive_comb_check(t, 16)?;
        bad_total += bad;
        parts.push(format!("T={t}: {checked} sequences, {bad} counterexamples"));
    }
    verdict(bad_total == 0, format!("lengths <= 16: {}", parts.join("; ")))
}

fn c10() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut margin = f64::INFINITY;
    for ri in random_suite(100, 10) {
        let c0 = build_chain(&ri.graph)?;
        let sigma = Distribution::restricted(c0.stationary().as_slice(), &ri.s_set)?;
        let budget = commute_quantity(&ri.graph, &sigma, &ri.marked)? * rng.gen_range(1.0..2.0);
        let mi = build_modified_instance(&ri.graph, &sigma, &ri.marked, budget)?;
        let c = build_chain(&mi.graph)?;
        let q = InterpolationParams::new(rng.gen_range(0.0..0.95), rng.gen_range(0.0..0.99))?;
        let t = rng.gen_range(1..30u32);
        let t_later = t + rng.gen_range(1..30u32);
        let (lhs, rhs) = norm_vs_joint_probability(&c, &mi.source_prime, &mi.marked_prime, q, t, t_later)?;
        margin = margin.min(lhs - rhs);
    }
    verdict(margin >= -1e-10, format!("100 tuples: min(norm - joint probability) = {margin:.3e} (need >= -1e-10)"))
}

fn c11() -> Result<Verdict> {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in suite_problems() {
        let c = build_chain(&p.graph)?;
        let cq = commute_quantity(&p.graph, &p.sigma, &p.marked)?;
        let limit = 64.0 * cq;
        let sweep = search_fastforward_sweep(&c, &p.sigma, &p.marked, &SearchConfig::new(2, 11), 2, limit as usize, 0.5)?;
        let success = sweep.runs.last().map_or(0.0, |o| o.success_probability);
        let hit = sweep.horizon.is_some_and(|t| t as f64 <= limit);
        ok &= hit;
        parts.push(format!("{} T={} (64C={limit:.0}) p={success:.3}", p.name, sweep.horizon.map_or("none".into(), |t| t.to_string())));
    }
    verdict(ok, parts.join("; "))
}

fn c12(b: &Baselines) -> Result<Verdict> {
    let mut worst_tv = 0.0f64;
    let mut tv_count = 0;
    for p in suite_problems().into_iter().filter(|p| p.graph.n() <= 8) {
        let c = build_chain(&p.graph)?;
        for t in [8usize, 32, 64] {
            let eq = algorithm_equivalence(&c, &p.sigma, &p.marked, &SearchConfig::new(t, 12))?;
            worst_tv = worst_tv.max(eq.total_variation);
            tv_count += 1;
        }
    }
    let mut kappa = f64::INFINITY;
    let mut at = String::new();
    for p in suite_problems() {
        let c = build_chain(&p.graph)?;
        let cq = commute_quantity(&p.graph, &p.sigma, &p.marked)?;
        let start = 1usize << (4.0 * cq).log2().ceil() as u32;
        for t in [start, 2 * start] {
            let o = search_simple(&c, &p.sigma, &p.marked, &SearchConfig::new(t, 12))?;
            let k = o.success_probability * (t as f64).log2();
            if k < kappa {
                kappa = k;
                at = format!("{} T={t}", p.name);
            }
        }
    }
    verdict(
        worst_tv <= 1e-8 && kappa >= b.alg2_kappa_prime,
        format!(
            "{tv_count} (instance, T<=64) pairs: max TV {worst_tv:.1e} (tol 1e-8); min p*log2 T = {kappa:.3} at {at} (baseline kappa' {})",
            b.alg2_kappa_prime
        ),
    )
}

fn c13(b: &Baselines) -> Result<Verdict> {
    // t_inner = 1 against fast-forward search
    let mut worst = 0.0f64;
    for p in suite_problems() {
        let c = build_chain(&p.graph)?;
        let cfg = SearchConfig::new(32, 13);
        let a = search_fastforward(&c, &p.sigma, &p.marked, &cfg)?;
        let t = search_tstep(&c, &p.sigma, &p.marked, 1, &cfg)?;
        worst = worst.max((a.success_probability - t.success_probability).abs());
    }
    // MNRS regime on K5 with loops, at σ = π
    let k5 = k5_loops(2.0);
    let c = build_chain(&k5.graph)?;
    let delta = spectral_gap(&c)?;
    let t_mnrs = (1.0 / delta).ceil() as u32;
    let g_t = chain_to_graph(&chain_power(&c, t_mnrs).chain)?;
    let c_t = g_t.total_weight() * stationary_resistance(&g_t, &k5.marked)?.value;
    let pi_m: f64 = k5.marked.iter().map(|&u| c.stationary()[u]).sum();
    let mnrs = c_t <= 2.0 / pi_m;
    // unique marked vertex, t = ⌈π(m)·HT⌉; bipartite chains have reducible P^t
    let mut worst_c = 0.0f64;
    let mut excluded = Vec::new();
    for p in suite_problems() {
        let c = build_chain(&p.graph)?;
        let m = p.marked[0];
        let pi_m = c.stationary()[m];
        let ht = hitting_time_stationary(&c, &[m])?.finite().unwrap_or(f64::INFINITY);
        let t = (pi_m * ht).ceil().max(1.0) as u32;
        let power = chain_power(&c, t).chain;
        match hitting_time_stationary(&power, &[m]) {
            Ok(h) if h.finite().is_some() => worst_c = worst_c.max(h.finite().unwrap_or(0.0) * pi_m),
            _ => excluded.push(format!("{} (P^{t} reducible)", p.name)),
        }
    }
    let unique = worst_c <= b.unique_marked_c;
    verdict(
        worst <= 1e-9 && mnrs && unique,
        format!(
            "t_inner=1 max |diff| {worst:.1e} (tol 1e-9); K5 loops delta={delta:.4} t={t_mnrs}: C_pi,M(P^t)={c_t:.4} <= 2/pi(M)={:.4}; unique marked max HT(P^t)*pi(m) = {worst_c:.4} <= c={} (excluded: {})",
            2.0 / pi_m,
            b.unique_marked_c,
            if excluded.is_empty() { "none".into() } else { excluded.join(", ") }
        ),
    )
}

fn c14() -> Result<Verdict> {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut skipped = 0;
    let mut problems = suite_problems();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for k in 0..5 {
        let n = rng.gen_range(4..=8);
        let graph = random_connected_graph(n, 0.4, &mut rng);
        let sigma = random_distribution_on(n, &[0, 1], &mut rng);
        problems.push(qwsearch::instances::Problem { name: format!("random{k}"), graph, sigma, marked: vec![n - 1] });
    }
    for (i, p) in problems.iter().enumerate() {
        let cq = commute_quantity(&p.graph, &p.sigma, &p.marked)?;
        let mi = build_modified_instance(&p.graph, &p.sigma, &p.marked, cq)?;
        let c = build_chain(&mi.graph)?;
        let cprime = commute_quantity(&mi.graph, &mi.sigma_prime, &mi.marked_prime)?;
        let horizon = (4.0 * cprime).ceil() as usize;
        match check_claim_commute(&c, &mi.source_prime, &mi.marked_prime, 0.5, horizon, 100_000, 1400 + i as u64) {
            Ok(est) => {
                let pass = est.frequency >= 0.25 - 3.0 * est.std_error;
                ok &= pass;
                parts.push(format!("{} T={horizon}: {:.4}±{:.4}", p.name, est.frequency, est.std_error));
            }
            Err(qwsearch::Error::Precondition(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    ok &= !parts.is_empty();
    verdict(ok, format!("freq >= 1/4 - 3 s.e. over 1e5 trials: {}; {skipped} outside hypotheses", parts.join("; ")))
}

fn main() {
    let b = baselines();
    assert!(b.profile_kappa > 0.0);
    type Crit<'a> = (&'a str, f64, Box<dyn Fn() -> Result<Verdict> + 'a>);
    let criteria: Vec<Crit> = vec![
        ("three-vertex path golden values", 1.0, Box::new(c1)),
        ("resistance = commute time, both clauses", 10.0, Box::new(c2)),
        ("return identity and Kac", f64::INFINITY, Box::new(c3)),
        ("modified instance pi'(S') and C'", f64::INFINITY, Box::new(c4)),
        ("walk block encodings", 30.0, Box::new(c5)),
        ("reflection product = T_2n(D)", f64::INFINITY, Box::new(c6)),
        ("fast-forward operator bound and counter", 120.0, Box::new(c7)),
        ("Chebyshev scalar bound", 5.0, Box::new(c8)),
        ("box comb exhaustive", f64::INFINITY, Box::new(c9)),
        ("norm dominates joint probability", f64::INFINITY, Box::new(c10)),
        ("Fast-forward search doubling sweep", 300.0, Box::new(c11)),
        ("Simple search equivalence and kappa'", f64::INFINITY, Box::new(|| c12(&b))),
        ("t-step search regimes", f64::INFINITY, Box::new(|| c13(&b))),
        ("hit-then-return Monte Carlo", f64::INFINITY, Box::new(c14)),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(v) => (v.pass && secs < *budget, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let limit = if budget.is_finite() { format!(" (limit {budget} s)") } else { String::new() };
        println!("criterion {:2} {} {name}: {detail} [{secs:.2} s{limit}]", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
