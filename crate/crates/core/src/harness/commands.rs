//! One report-producing function per CLI subcommand.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use super::{ExperimentReport, LoadedInstance, ReportRow};
use crate::classical::{hitting_time_stationary, simulate, stopping_stats, Expectation};
use crate::electric::{build_modified_instance, commute_quantity, effective_resistance};
use crate::error::Result;
use crate::fast_forward::FastForward;
use crate::graph::{build_chain, ReversibleChain};
use crate::classical::interpolate_absorbing;
use crate::quantum::{
    discriminant, verify_block_encoding, InterpolatedWalk, Lambda, ModifiedWalk, SzegedyWalk, WalkOperator,
};
use crate::search::{search_fastforward, search_fastforward_sweep, search_simple, search_tstep, SearchConfig, SearchOutcome};

fn chain(li: &LoadedInstance) -> Result<ReversibleChain> {
    build_chain(&li.problem.graph)
}

fn base_report(command: &str, li: &LoadedInstance, seed: u64) -> ExperimentReport {
    let mut r = ExperimentReport::new(command, seed);
    r.warnings = li.warnings.clone();
    if li.detect_mode {
        r.warnings.push("marked set is empty: detect mode".into());
    }
    r
}

fn name(li: &LoadedInstance) -> &str {
    &li.problem.name
}

fn expectation(e: Expectation) -> f64 {
    e.finite().unwrap_or(f64::INFINITY)
}

/// R_{σ,M} and C_{σ,M} = W·R_{σ,M}.
pub fn resistance(li: &LoadedInstance, seed: u64) -> Result<ExperimentReport> {
    let p = &li.problem;
    let r = effective_resistance(&p.graph, &p.sigma, &p.marked)?.value;
    let c = commute_quantity(&p.graph, &p.sigma, &p.marked)?;
    let mut rep = base_report("resistance", li, seed);
    rep.runs.push(json!({ "R": r, "C": c, "W": p.graph.total_weight() }));
    rep.rows.push(ReportRow::info(name(li), "R_(sigma,M)", r));
    rep.rows.push(ReportRow::info(name(li), "C_(sigma,M)", c));
    if let Some(budget) = li.budget {
        rep.rows.push(ReportRow::at_most(name(li), "C_(sigma,M) <= budget C", c, budget, 0.0));
    }
    Ok(rep)
}

/// Exact stopping statistics with S = supp σ.
pub fn hitting(li: &LoadedInstance, seed: u64) -> Result<ExperimentReport> {
    let p = &li.problem;
    let c = chain(li)?;
    let s_set = p.sigma.support();
    let st = stopping_stats(&c, &s_set, &p.marked, &p.sigma)?;
    let ht = hitting_time_stationary(&c, &p.marked)?;
    let mut rep = base_report("hitting", li, seed);
    rep.runs.push(serde_json::to_value(st).expect("serializable"));
    let n = name(li);
    rep.rows.push(ReportRow::info(n, "E_sigma(tau_M)", expectation(st.hitting_time)));
    rep.rows.push(ReportRow::info(n, "Pr_(pi|S)(tau_M<tau_S+)", st.return_probability));
    rep.rows.push(ReportRow::info(n, "E_(pi|S)(tau_S+)", st.expected_return));
    rep.rows.push(ReportRow::info(n, "E_sigma(tau^M_S)", expectation(st.commute_time)));
    rep.rows.push(ReportRow::info(n, "HT(P,M)", expectation(ht)));
    Ok(rep)
}

pub fn simulate_walk(li: &LoadedInstance, steps: usize, seed: u64) -> Result<ExperimentReport> {
    let c = chain(li)?;
    let traj = simulate(&c, &li.problem.sigma, steps, seed);
    let names: Vec<&str> = traj.iter().map(|&u| li.file.vertices[u].as_str()).collect();
    let hit = traj.iter().position(|u| li.problem.marked.contains(u));
    let mut rep = base_report("simulate", li, seed);
    rep.config = json!({ "steps": steps, "seed": seed });
    rep.runs.push(json!({ "trajectory": names, "first_marked_step": hit }));
    rep.rows.push(ReportRow::info(name(li), "first marked step", hit.map_or(f64::INFINITY, |h| h as f64)));
    Ok(rep)
}

/// Block of the Szegedy, interpolated and modified-graph walks against
/// their discriminants.
pub fn qwalk_verify(li: &LoadedInstance, s_values: &[f64], tol: f64, seed: u64) -> Result<ExperimentReport> {
    let p = &li.problem;
    let c = chain(li)?;
    let n = c.n();
    let d = discriminant(&c)?;
    let w: Arc<dyn WalkOperator> = Arc::new(SzegedyWalk::new(&c)?);
    let mut rep = base_report("qwalk-verify", li, seed);
    rep.config = json!({ "s": s_values, "tolerance": tol });
    let nm = name(li);
    rep.rows.push(ReportRow::equal(nm, "Szegedy block = D(P)", verify_block_encoding(w.as_ref(), d.matrix())?, 0.0, tol));
    let mut marked = vec![false; n];
    p.marked.iter().for_each(|&u| marked[u] = true);
    for &s in s_values {
        let op = InterpolatedWalk::new(w.clone(), &marked, s)?;
        let target = discriminant(&interpolate_absorbing(&c, &p.marked, s)?)?;
        let dev = verify_block_encoding(&op, target.matrix())?;
        rep.rows.push(ReportRow::equal(nm, &format!("interpolated s={s} block = D(P(s))"), dev, 0.0, tol));
    }
    if !p.marked.is_empty() {
        let budget = match li.budget {
            Some(b) => b,
            None => commute_quantity(&p.graph, &p.sigma, &p.marked)?,
        };
        let mi = build_modified_instance(&p.graph, &p.sigma, &p.marked, budget)?;
        let op = ModifiedWalk::new(w, Lambda::new(&p.sigma, c.stationary().as_slice(), budget)?)?;
        let dm = discriminant(&build_chain(&mi.graph)?)?;
        let emb = mi.system_embedding();
        let mut target = DMatrix::zeros(2 * n, 2 * n);
        for (i, &a) in emb.iter().enumerate() {
            for (j, &b) in emb.iter().enumerate() {
                target[(a, b)] = dm.matrix()[(i, j)];
            }
        }
        let dev = verify_block_encoding(&op, &target)?;
        rep.rows.push(ReportRow::equal(nm, &format!("modified walk C={budget} block = D(P')"), dev, 0.0, tol));
    }
    Ok(rep)
}

/// Fast-forwarded block against D^t on every basis vector, and the walk counter bound.
pub fn fastforward(li: &LoadedInstance, t: u64, eps: f64, tol: Option<f64>, seed: u64) -> Result<ExperimentReport> {
    let c = chain(li)?;
    let d = discriminant(&c)?;
    let ff = FastForward::new(Arc::new(SzegedyWalk::new(&c)?), t, eps)?;
    let blk = ff.block();
    let want = d.function_matrix(|x| x.powi(t as i32));
    let n = c.n();
    let worst = (0..n)
        .map(|j| {
            let e = DVector::from_fn(n, |i, _| (i == j) as u8 as f64);
            (&blk * &e - &want * &e).norm_squared()
        })
        .fold(0.0, f64::max);
    let bound = 4.0 * (2.0 * t as f64 * (2.0 / eps).ln()).sqrt().ceil() + 4.0;
    let mut rep = base_report("fastforward", li, seed);
    let e = ff.expansion();
    rep.config = json!({ "t": t, "eps": eps, "degree": e.d(), "alpha": e.alpha(), "control_qubits": e.ell() });
    rep.runs.push(json!({ "calls": ff.calls(), "max_squared_error": worst }));
    let nm = name(li);
    rep.rows.push(ReportRow::at_most(nm, "max_j ||block e_j - D^t e_j||^2 <= eps", worst, tol.unwrap_or(eps), 0.0));
    rep.rows.push(ReportRow::at_most(nm, "walk calls <= 4*ceil(sqrt(2t ln(2/eps)))+4", ff.calls().walk as f64, bound, 0.0));
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchKind {
    FastForward,
    Simple,
    TStep(u32),
}

#[derive(Clone, Debug)]
pub struct SearchRequest {
    pub kind: SearchKind,
    pub config: SearchConfig,
    /// Fast-forward search only: double T from 2 up to `config.horizon`.
    pub sweep_doubling: bool,
    pub keep_trace: bool,
}

fn outcome_value(mut o: SearchOutcome, keep_trace: bool) -> serde_json::Value {
    if !keep_trace {
        o.trace.clear();
    }
    serde_json::to_value(o).expect("serializable")
}

pub fn search(li: &LoadedInstance, req: &SearchRequest) -> Result<ExperimentReport> {
    let p = &li.problem;
    let c = chain(li)?;
    let mut cfg = req.config.clone();
    if cfg.budget.is_none() {
        cfg.budget = li.budget;
    }
    let command = match req.kind {
        SearchKind::FastForward => "search-ff",
        SearchKind::Simple => "search-simple",
        SearchKind::TStep(_) => "search-tstep",
    };
    let mut rep = base_report(command, li, cfg.seed);
    let nm = name(li).to_string();
    let record = |rep: &mut ExperimentReport, o: SearchOutcome| {
        let label = format!("T={}: success probability", o.config.horizon);
        rep.rows.push(ReportRow::info(&nm, &label, o.success_probability));
        if let Some(r) = o.repeated_success {
            rep.rows.push(ReportRow::info(&nm, &format!("T={}: repeated success", o.config.horizon), r));
        }
        rep.warnings.extend(o.warnings.iter().cloned());
        rep.config = serde_json::to_value(&o.config).expect("serializable");
        rep.runs.push(outcome_value(o, req.keep_trace));
    };
    match req.kind {
        SearchKind::FastForward if req.sweep_doubling => {
            let sweep = search_fastforward_sweep(&c, &p.sigma, &p.marked, &cfg, 2, cfg.horizon, 0.5)?;
            let found = sweep.horizon;
            for o in sweep.runs {
                record(&mut rep, o);
            }
            rep.rows.push(ReportRow::info(&nm, "sweep horizon", found.map_or(f64::INFINITY, |t| t as f64)));
        }
        SearchKind::FastForward => record(&mut rep, search_fastforward(&c, &p.sigma, &p.marked, &cfg)?),
        SearchKind::Simple => record(&mut rep, search_simple(&c, &p.sigma, &p.marked, &cfg)?),
        SearchKind::TStep(t) => record(&mut rep, search_tstep(&c, &p.sigma, &p.marked, t, &cfg)?),
    }
    Ok(rep)
}
