//! Built-in suite instances and seeded random generators.

use rand::Rng;

use crate::graph::{Distribution, WeightedGraph};

/// A graph with a start distribution and marked set.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub graph: WeightedGraph,
    pub sigma: Distribution,
    pub marked: Vec<usize>,
}

/// Connected graph: random spanning tree plus each remaining pair with
/// probability `density`; weights uniform in [0.5, 2).
pub fn random_connected_graph<R: Rng>(n: usize, density: f64, rng: &mut R) -> WeightedGraph {
    let mut edges = Vec::new();
    let mut tree = vec![vec![false; n]; n];
    for v in 1..n {
        let u = rng.gen_range(0..v);
        tree[u][v] = true;
        edges.push((u, v, rng.gen_range(0.5..2.0)));
    }
    for u in 0..n {
        for v in u + 1..n {
            if !tree[u][v] && rng.gen::<f64>() < density {
                edges.push((u, v, rng.gen_range(0.5..2.0)));
            }
        }
    }
    WeightedGraph::from_edges(n, &edges).expect("generated graph is valid")
}

/// Like [`random_connected_graph`] but with a self-loop at vertex 0, so the
/// walk is aperiodic.
pub fn random_ergodic_graph<R: Rng>(n: usize, density: f64, rng: &mut R) -> WeightedGraph {
    let g = random_connected_graph(n, density, rng);
    let x = rng.gen_range(0.5..2.0);
    g.with_edge_added(0, 0, x).expect("valid")
}

/// Random probability vector supported on `set`.
pub fn random_distribution_on<R: Rng>(n: usize, set: &[usize], rng: &mut R) -> Distribution {
    let mut p = vec![0.0; n];
    for &u in set {
        p[u] = rng.gen_range(0.05..1.0);
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    Distribution::with_tolerance(p, 1e-12).expect("valid")
}

/// Random nonempty proper subset of size `k` drawn from `pool`.
pub fn random_subset<R: Rng>(pool: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    let mut v = pool.to_vec();
    for i in 0..k.min(v.len()) {
        let j = rng.gen_range(i..v.len());
        v.swap(i, j);
    }
    v.truncate(k);
    v.sort_unstable();
    v
}

/// Path u–v–w with unit weights, S = {u, v}, σ = π|_S, M = {w}.
pub fn three_path() -> Problem {
    let graph = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let sigma = Distribution::restricted(graph.stationary().probs(), &[0, 1]).unwrap();
    Problem { name: "appA".into(), graph, sigma, marked: vec![2] }
}

pub fn path6() -> Problem {
    let edges: Vec<_> = (0..5).map(|i| (i, i + 1, 1.0)).collect();
    let graph = WeightedGraph::from_edges(6, &edges).unwrap();
    Problem { name: "path6".into(), graph, sigma: Distribution::point(6, 0).unwrap(), marked: vec![5] }
}

pub fn cycle5_loops() -> Problem {
    let mut edges: Vec<_> = (0..5).map(|i| (i, (i + 1) % 5, 1.0)).collect();
    edges.extend((0..5).map(|i| (i, i, 1.0)));
    let graph = WeightedGraph::from_edges(5, &edges).unwrap();
    Problem { name: "cycle5_loops".into(), graph, sigma: Distribution::point(5, 0).unwrap(), marked: vec![2] }
}

pub fn k5() -> Problem {
    let graph = complete(5, 0.0);
    Problem { name: "k5".into(), graph, sigma: Distribution::point(5, 0).unwrap(), marked: vec![4] }
}

/// K5 with a self-loop of weight `loop_weight` on every vertex.
pub fn k5_loops(loop_weight: f64) -> Problem {
    let graph = complete(5, loop_weight);
    Problem { name: "k5_loops".into(), graph, sigma: Distribution::point(5, 0).unwrap(), marked: vec![4] }
}

/// Two K4 cliques joined by a single bridge edge 3–4.
pub fn two_cliques() -> Problem {
    let mut edges = Vec::new();
    for base in [0, 4] {
        for u in 0..4 {
            for v in u + 1..4 {
                edges.push((base + u, base + v, 1.0));
            }
        }
    }
    edges.push((3, 4, 1.0));
    let graph = WeightedGraph::from_edges(8, &edges).unwrap();
    Problem { name: "two_cliques".into(), graph, sigma: Distribution::point(8, 0).unwrap(), marked: vec![7] }
}

/// The five graphs used by the search acceptance checks.
pub fn suite_problems() -> Vec<Problem> {
    vec![three_path(), path6(), cycle5_loops(), k5(), two_cliques()]
}

fn complete(n: usize, loop_weight: f64) -> WeightedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v, 1.0));
        }
        if loop_weight > 0.0 {
            edges.push((u, u, loop_weight));
        }
    }
    WeightedGraph::from_edges(n, &edges).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{check_ergodic, Ergodicity};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_are_deterministic() {
        let a = random_connected_graph(9, 0.3, &mut ChaCha8Rng::seed_from_u64(5));
        let b = random_connected_graph(9, 0.3, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert_ne!(check_ergodic(&a), Ergodicity::Disconnected);
        let e = random_ergodic_graph(9, 0.3, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(check_ergodic(&e), Ergodicity::Ergodic);
    }

    #[test]
    fn suite_shapes() {
        let s = suite_problems();
        assert_eq!(s.len(), 5);
        for p in &s {
            assert!(p.graph.n() <= 16);
            assert!(p.marked.iter().all(|&m| p.sigma.get(m) == 0.0));
        }
        assert_eq!(two_cliques().graph.total_weight(), 26.0);
    }
}
