//! Flows, effective resistance and the modified two-layer graph.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{Distribution, WeightedGraph, DEFAULT_MAX_VERTICES};
use crate::linalg;

/// Antisymmetric edge function from `source` into `sinks`, with the
/// potentials that generate it.
#[derive(Clone, Debug)]
pub struct UnitFlow {
    flow: DMatrix<f64>,
    potentials: DVector<f64>,
    source: Vec<f64>,
    sinks: Vec<usize>,
}

impl UnitFlow {
    pub fn flow(&self) -> &DMatrix<f64> {
        &self.flow
    }

    pub fn potentials(&self) -> &DVector<f64> {
        &self.potentials
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    /// Σ_{u<v} p²_{u,v}/w_{u,v}.
    pub fn energy(&self, g: &WeightedGraph) -> f64 {
        flow_energy(g, &self.flow)
    }

    /// Largest violation of Σ_v p_{u,v} = σ_u over unmarked u.
    pub fn conservation_residual(&self) -> f64 {
        let n = self.flow.nrows();
        let m = linalg::mask(n, &self.sinks, "sinks").expect("validated");
        (0..n)
            .filter(|&u| !m[u])
            .map(|u| (self.flow.row(u).sum() - self.source[u]).abs())
            .fold(0.0, f64::max)
    }

    /// Net flow leaving the sink set, Σ_{u∈M} Σ_{v∉M} p_{u,v}.
    pub fn sink_outflow(&self) -> f64 {
        let n = self.flow.nrows();
        let m = linalg::mask(n, &self.sinks, "sinks").expect("validated");
        let mut s = 0.0;
        for u in (0..n).filter(|&u| m[u]) {
            for v in (0..n).filter(|&v| !m[v]) {
                s += self.flow[(u, v)];
            }
        }
        s
    }
}

pub fn flow_energy(g: &WeightedGraph, flow: &DMatrix<f64>) -> f64 {
    let n = g.n();
    let mut e = 0.0;
    for u in 0..n {
        for v in u + 1..n {
            let w = g.weight(u, v);
            if w > 0.0 {
                e += flow[(u, v)] * flow[(u, v)] / w;
            }
        }
    }
    e
}

#[derive(Clone, Debug)]
pub struct Resistance {
    pub value: f64,
    pub flow: UnitFlow,
}

fn reachable_from(g: &WeightedGraph, start: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; g.n()];
    let mut queue: VecDeque<usize> = start.iter().copied().collect();
    for &s in start {
        seen[s] = true;
    }
    while let Some(u) = queue.pop_front() {
        for v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// R_{σ,M} with σ supported off M.
pub fn effective_resistance(g: &WeightedGraph, sigma: &Distribution, marked: &[usize]) -> Result<Resistance> {
    check_len(g, sigma)?;
    let m = linalg::mask(g.n(), marked, "M")?;
    if let Some(u) = sigma.support().into_iter().find(|&u| m[u]) {
        return Err(Error::Precondition(format!("σ has mass on marked vertex {u}")));
    }
    grounded_solve(g, sigma.probs(), marked)
}

/// R_{π,M}: the stationary mass already on M enters at the sink, so only
/// the unmarked part of π drives current. W·R_{π,M} = HT(P,M).
pub fn stationary_resistance(g: &WeightedGraph, marked: &[usize]) -> Result<Resistance> {
    grounded_solve(g, g.stationary().probs(), marked)
}

fn check_len(g: &WeightedGraph, sigma: &Distribution) -> Result<()> {
    if sigma.len() != g.n() {
        return Err(Error::InvalidDistribution(format!("length {} does not match n = {}", sigma.len(), g.n())));
    }
    Ok(())
}

/// Ground M, solve L_ff φ = σ_f on the vertices connected to M, return σᵀφ.
fn grounded_solve(g: &WeightedGraph, source: &[f64], marked: &[usize]) -> Result<Resistance> {
    let n = g.n();
    if marked.is_empty() {
        return Err(Error::InvalidSet("M is empty".into()));
    }
    let m = linalg::mask(n, marked, "M")?;
    let reach = reachable_from(g, marked);
    if let Some(u) = (0..n).find(|&u| source[u] > 0.0 && !reach[u]) {
        return Err(Error::InfiniteResistance(format!("vertex {u} in supp(σ) cannot reach M")));
    }
    let free: Vec<usize> = (0..n).filter(|&u| reach[u] && !m[u]).collect();
    let k = free.len();
    let mut phi = DVector::zeros(n);
    if k > 0 {
        let mut l = DMatrix::zeros(k, k);
        let mut b = DVector::zeros(k);
        for (i, &u) in free.iter().enumerate() {
            let mut diag = 0.0;
            for v in 0..n {
                if v != u {
                    diag += g.weight(u, v);
                }
            }
            l[(i, i)] = diag;
            for (j, &v) in free.iter().enumerate() {
                if i != j {
                    l[(i, j)] = -g.weight(u, v);
                }
            }
            b[i] = source[u];
        }
        let x = match l.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => l
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::Integrity("grounded Laplacian is singular".into()))?,
        };
        for (i, &u) in free.iter().enumerate() {
            phi[u] = x[i];
        }
    }
    let mut flow = DMatrix::zeros(n, n);
    for u in 0..n {
        for v in 0..n {
            if u != v {
                flow[(u, v)] = (phi[u] - phi[v]) * g.weight(u, v);
            }
        }
    }
    let value = (0..n).map(|u| source[u] * phi[u]).sum();
    Ok(Resistance {
        value,
        flow: UnitFlow { flow, potentials: phi, source: source.to_vec(), sinks: marked.to_vec() },
    })
}

/// C_{σ,M} = W·R_{σ,M}.
pub fn commute_quantity(g: &WeightedGraph, sigma: &Distribution, marked: &[usize]) -> Result<f64> {
    Ok(g.total_weight() * effective_resistance(g, sigma, marked)?.value)
}

#[derive(Clone, Debug)]
pub struct Contraction {
    pub graph: WeightedGraph,
    pub supervertex: usize,
    /// Old vertex index → new vertex index.
    pub map: Vec<usize>,
}

/// Replace S by one vertex s′; internal S-weight becomes a self-loop so W is kept.
pub fn contract_set(g: &WeightedGraph, set: &[usize]) -> Result<Contraction> {
    let n = g.n();
    let s = linalg::mask(n, set, "S")?;
    if set.is_empty() {
        return Err(Error::InvalidSet("S is empty".into()));
    }
    if set.len() == n {
        return Err(Error::InvalidSet("S = X cannot be contracted".into()));
    }
    let first = *set.iter().min().unwrap();
    let mut map = vec![0; n];
    let mut next = 0;
    let mut supervertex = 0;
    for u in 0..n {
        if s[u] && u != first {
            continue;
        }
        if u == first {
            supervertex = next;
        }
        map[u] = next;
        next += 1;
    }
    for u in 0..n {
        if s[u] {
            map[u] = supervertex;
        }
    }
    let mut w = DMatrix::zeros(next, next);
    for u in 0..n {
        for v in 0..n {
            w[(map[u], map[v])] += g.weight(u, v);
        }
    }
    Ok(Contraction { graph: WeightedGraph::with_cap(w, usize::MAX)?, supervertex, map })
}

/// R_{S,M} = min over ρ on S of R_{ρ,M}, via contraction.
pub fn set_resistance(g: &WeightedGraph, set: &[usize], marked: &[usize]) -> Result<f64> {
    let n = g.n();
    let s = linalg::mask(n, set, "S")?;
    let m = linalg::mask(n, marked, "M")?;
    if marked.is_empty() {
        return Err(Error::InvalidSet("M is empty".into()));
    }
    if (0..n).any(|u| s[u] && m[u]) {
        return Err(Error::Precondition("S and M intersect".into()));
    }
    let c = contract_set(g, set)?;
    let nm: Vec<usize> = marked.iter().map(|&u| c.map[u]).collect();
    let e = Distribution::point(c.graph.n(), c.supervertex)?;
    Ok(effective_resistance(&c.graph, &e, &nm)?.value)
}

/// The two-layer graph G′: a copy of G on layer 0 plus a pendant (1,u) for
/// every u ∈ supp(σ), joined to (0,u) with weight σ_u·W/C.
#[derive(Clone, Debug)]
pub struct ModifiedInstance {
    pub graph: WeightedGraph,
    pub sigma_prime: Distribution,
    pub marked_prime: Vec<usize>,
    /// S′: the layer-1 vertices.
    pub source_prime: Vec<usize>,
    pub budget: f64,
    pub base_n: usize,
    /// Original vertex of each layer-1 copy, in index order.
    pub layer1_of: Vec<usize>,
}

impl ModifiedInstance {
    /// Index of (layer, u) in the modified graph, if that copy exists.
    pub fn vertex(&self, layer: usize, u: usize) -> Option<usize> {
        match layer {
            0 => (u < self.base_n).then_some(u),
            1 => self.layer1_of.iter().position(|&x| x == u).map(|i| self.base_n + i),
            _ => None,
        }
    }

    /// Position of each modified-graph vertex in the (b, u) ordering b·n + u.
    pub fn system_embedding(&self) -> Vec<usize> {
        let n = self.base_n;
        (0..n).chain(self.layer1_of.iter().map(|&u| n + u)).collect()
    }

    /// ρ on the original vertices moved to the layer-1 copies.
    pub fn lift(&self, rho: &Distribution) -> Result<Distribution> {
        if rho.len() != self.base_n {
            return Err(Error::InvalidDistribution("length mismatch".into()));
        }
        let mut p = vec![0.0; self.graph.n()];
        for u in rho.support() {
            let v = self.vertex(1, u).ok_or_else(|| {
                Error::Precondition(format!("ρ has mass on {u}, outside supp(σ)"))
            })?;
            p[v] = rho.get(u);
        }
        Distribution::new(p)
    }
}

pub fn build_modified_graph(g: &WeightedGraph, sigma: &Distribution, budget: f64) -> Result<ModifiedInstance> {
    check_len(g, sigma)?;
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::Domain(format!("C must be positive, got {budget}")));
    }
    let n = g.n();
    let total = g.total_weight();
    let layer1_of = sigma.support();
    let n2 = n + layer1_of.len();
    let mut w = DMatrix::zeros(n2, n2);
    w.view_mut((0, 0), (n, n)).copy_from(g.weights());
    let mut sp = vec![0.0; n2];
    for (i, &u) in layer1_of.iter().enumerate() {
        let x = sigma.get(u) * total / budget;
        w[(u, n + i)] = x;
        w[(n + i, u)] = x;
        sp[n + i] = sigma.get(u);
    }
    let graph = WeightedGraph::with_cap(w, 2 * DEFAULT_MAX_VERTICES)?;
    Ok(ModifiedInstance {
        graph,
        sigma_prime: Distribution::new(sp)?,
        marked_prime: Vec::new(),
        source_prime: (n..n2).collect(),
        budget,
        base_n: n,
        layer1_of,
    })
}

/// Same as [`build_modified_graph`] with the marked set carried over to layer 0.
pub fn build_modified_instance(
    g: &WeightedGraph,
    sigma: &Distribution,
    marked: &[usize],
    budget: f64,
) -> Result<ModifiedInstance> {
    linalg::mask(g.n(), marked, "M")?;
    let mut mi = build_modified_graph(g, sigma, budget)?;
    mi.marked_prime = marked.to_vec();
    Ok(mi)
}

/// p = 1/Σ_u ρ_u²/σ_u.
pub fn overlap_factor(rho: &Distribution, sigma: &Distribution) -> Result<f64> {
    let mut s = 0.0;
    for u in rho.support() {
        if sigma.get(u) <= 0.0 {
            return Err(Error::Precondition(format!("ρ has mass on {u}, outside supp(σ)")));
        }
        s += rho.get(u) * rho.get(u) / sigma.get(u);
    }
    Ok(1.0 / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{three_path, random_connected_graph, random_distribution_on, random_subset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path(k: usize) -> WeightedGraph {
        let e: Vec<_> = (0..k).map(|i| (i, i + 1, 1.0)).collect();
        WeightedGraph::from_edges(k + 1, &e).unwrap()
    }

    /// Projected gradient descent on Σp²/w over edge flows with fixed divergence.
    fn qp_flow_energy(g: &WeightedGraph, sigma: &Distribution, marked: &[usize]) -> f64 {
        let n = g.n();
        let m = linalg::mask(n, marked, "M").unwrap();
        let edges: Vec<(usize, usize)> =
            (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|&(u, v)| g.weight(u, v) > 0.0).collect();
        let free: Vec<usize> = (0..n).filter(|&u| !m[u]).collect();
        let mut a = DMatrix::zeros(free.len(), edges.len());
        for (j, &(u, v)) in edges.iter().enumerate() {
            if let Some(i) = free.iter().position(|&x| x == u) {
                a[(i, j)] = 1.0;
            }
            if let Some(i) = free.iter().position(|&x| x == v) {
                a[(i, j)] = -1.0;
            }
        }
        let b = DVector::from_iterator(free.len(), free.iter().map(|&u| sigma.get(u)));
        let pinv = a.clone().pseudo_inverse(1e-12).unwrap();
        let proj = DMatrix::identity(edges.len(), edges.len()) - &pinv * &a;
        let winv = DVector::from_iterator(edges.len(), edges.iter().map(|&(u, v)| 1.0 / g.weight(u, v)));
        let wmin = edges.iter().map(|&(u, v)| g.weight(u, v)).fold(f64::INFINITY, f64::min);
        let mut x = &pinv * b;
        for _ in 0..20000 {
            let grad = x.component_mul(&winv);
            x -= &proj * grad * (0.5 * wmin);
        }
        x.iter().zip(winv.iter()).map(|(p, wi)| p * p * wi).sum()
    }

    #[test]
    fn three_path_resistance() {
        let p = three_path();
        let r = effective_resistance(&p.graph, &p.sigma, &p.marked).unwrap();
        assert!((r.value - 10.0 / 9.0).abs() < 1e-12);
        assert!((commute_quantity(&p.graph, &p.sigma, &p.marked).unwrap() - 40.0 / 9.0).abs() < 1e-12);
        assert!((r.flow.energy(&p.graph) - r.value).abs() < 1e-12);
        assert!(r.flow.conservation_residual() < 1e-12);
        assert!((r.flow.sink_outflow() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn series_path() {
        for k in 1..6 {
            let g = path(k);
            let e = Distribution::point(k + 1, 0).unwrap();
            let r = effective_resistance(&g, &e, &[k]).unwrap().value;
            assert!((r - k as f64).abs() < 1e-12);
        }
        let g = path(1);
        let c = commute_quantity(&g, &Distribution::point(2, 0).unwrap(), &[1]).unwrap();
        assert!((c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejections() {
        let g = path(2);
        let s = Distribution::point(3, 2).unwrap();
        assert!(matches!(effective_resistance(&g, &s, &[2]), Err(Error::Precondition(_))));
        let two = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let e = Distribution::point(4, 0).unwrap();
        assert!(matches!(effective_resistance(&two, &e, &[3]), Err(Error::InfiniteResistance(_))));
        assert!(contract_set(&g, &[0, 1, 2]).is_err());
    }

    #[test]
    fn laplacian_matches_flow_qp() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..3 {
            let g = random_connected_graph(10, 0.3, &mut rng);
            let marked = random_subset(&(0..10).collect::<Vec<_>>(), 2, &mut rng);
            let rest: Vec<usize> = (0..10).filter(|u| !marked.contains(u)).collect();
            let src = random_subset(&rest, 3, &mut rng);
            let sigma = random_distribution_on(10, &src, &mut rng);
            let r = effective_resistance(&g, &sigma, &marked).unwrap().value;
            let qp = qp_flow_energy(&g, &sigma, &marked);
            assert!((r - qp).abs() < 1e-8, "{r} vs {qp}");
        }
    }

    #[test]
    fn circulation_increases_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_connected_graph(8, 0.5, &mut rng);
        let sigma = Distribution::point(8, 0).unwrap();
        let r = effective_resistance(&g, &sigma, &[7]).unwrap();
        // a triangle circulation on any triangle present
        let n = g.n();
        let mut found = false;
        'outer: for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    if g.weight(a, b) > 0.0 && g.weight(b, c) > 0.0 && g.weight(a, c) > 0.0 {
                        let mut f = r.flow.flow().clone();
                        let eps: f64 = rng.gen_range(0.01..0.1);
                        for (x, y) in [(a, b), (b, c), (c, a)] {
                            f[(x, y)] += eps;
                            f[(y, x)] -= eps;
                        }
                        assert!(flow_energy(&g, &f) > r.value);
                        found = true;
                        break 'outer;
                    }
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn adding_edges_never_increases_resistance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut g = random_connected_graph(9, 0.2, &mut rng);
        let sigma = random_distribution_on(9, &[0, 1, 2], &mut rng);
        let mut r = effective_resistance(&g, &sigma, &[8]).unwrap().value;
        for _ in 0..15 {
            let u = rng.gen_range(0..9);
            let v = rng.gen_range(0..9);
            g = g.with_edge_added(u, v, rng.gen_range(0.1..2.0)).unwrap();
            let r2 = effective_resistance(&g, &sigma, &[8]).unwrap().value;
            assert!(r2 <= r + 1e-12);
            r = r2;
        }
    }

    #[test]
    fn contraction_examples() {
        let g = path(2);
        let c = contract_set(&g, &[0, 1]).unwrap();
        assert_eq!(c.supervertex, 0);
        assert_eq!(c.graph.weight(0, 1), 1.0);
        assert_eq!(c.graph.weight(0, 0), 2.0);
        assert_eq!(c.graph.total_weight(), 4.0);
        let single = contract_set(&g, &[1]).unwrap();
        assert_eq!(single.graph, g);
        assert!((c.graph.stationary().get(0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn three_path_set_resistance() {
        let p = three_path();
        let r = set_resistance(&p.graph, &[0, 1], &[2]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!((r * p.graph.total_weight() - 4.0).abs() < 1e-12);
        let e = Distribution::point(3, 1).unwrap();
        let single = set_resistance(&p.graph, &[1], &[2]).unwrap();
        assert!((single - effective_resistance(&p.graph, &e, &[2]).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn set_resistance_is_a_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_connected_graph(8, 0.35, &mut rng);
        let s = [0, 1, 2];
        let rs = set_resistance(&g, &s, &[6, 7]).unwrap();
        for _ in 0..100 {
            let rho = random_distribution_on(8, &s, &mut rng);
            assert!(rs <= effective_resistance(&g, &rho, &[6, 7]).unwrap().value + 1e-12);
        }
    }

    #[test]
    fn set_resistance_grid_minimum() {
        // two-point S: scan ρ = (a, 1−a)
        let p = three_path();
        let mut best = f64::INFINITY;
        for i in 0..=1000 {
            let a = i as f64 / 1000.0;
            let rho = Distribution::new(vec![a, 1.0 - a, 0.0]).unwrap();
            best = best.min(effective_resistance(&p.graph, &rho, &[2]).unwrap().value);
        }
        assert!((best - set_resistance(&p.graph, &[0, 1], &[2]).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn modified_graph_invariants() {
        let p = three_path();
        let c = 40.0 / 9.0;
        let mi = build_modified_instance(&p.graph, &p.sigma, &p.marked, c).unwrap();
        let w = p.graph.total_weight();
        assert_eq!(mi.graph.n(), 5);
        for (i, &u) in mi.layer1_of.iter().enumerate() {
            assert_eq!(mi.graph.weight(u, 3 + i), p.sigma.get(u) * w / c);
        }
        assert!((mi.graph.total_weight() - w * (1.0 + 2.0 / c)).abs() < 1e-12);
        let pi = mi.graph.stationary();
        assert!((pi.mass(&mi.source_prime) - 1.0 / (c + 2.0)).abs() < 1e-12);
        let cp = commute_quantity(&mi.graph, &mi.sigma_prime, &mi.marked_prime).unwrap();
        assert!((cp - (40.0 / 9.0 / c + 1.0) * (c + 2.0)).abs() < 1e-9);
    }

    #[test]
    fn point_mass_adds_one_edge() {
        let g = path(3);
        let e = Distribution::point(4, 1).unwrap();
        let mi = build_modified_graph(&g, &e, 2.5).unwrap();
        assert_eq!(mi.graph.n(), 5);
        assert_eq!(mi.graph.weight(1, 4), g.total_weight() / 2.5);
    }

    #[test]
    fn lemma_4_5_random_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let g = random_connected_graph(8, 0.3, &mut rng);
            let sigma = random_distribution_on(8, &[0, 1, 2, 3], &mut rng);
            let budget = rng.gen_range(0.5..10.0);
            let mi = build_modified_instance(&g, &sigma, &[7], budget).unwrap();
            let rho = random_distribution_on(8, &[0, 2, 3], &mut rng);
            let p = overlap_factor(&rho, &sigma).unwrap();
            let c_rho = commute_quantity(&g, &rho, &[7]).unwrap();
            let lifted = mi.lift(&rho).unwrap();
            let cp = commute_quantity(&mi.graph, &lifted, &mi.marked_prime).unwrap();
            let expect = (c_rho / budget + 1.0 / p) * (budget + 2.0);
            assert!((cp - expect).abs() < 1e-9 * expect.max(1.0));
        }
    }
}
