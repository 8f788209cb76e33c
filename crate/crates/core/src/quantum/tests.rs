use super::*;
use crate::classical::interpolate_absorbing;
use crate::electric::build_modified_instance;
use crate::graph::build_chain;
use crate::instances::{three_path, random_connected_graph, random_distribution_on};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chain_of(p: &crate::instances::Problem) -> ReversibleChain {
    build_chain(&p.graph).unwrap()
}

// √(P_uv P_vu) straight from the transition matrix
fn naive_d(c: &ReversibleChain) -> DMatrix<f64> {
    let p = c.transition();
    DMatrix::from_fn(c.n(), c.n(), |u, v| (p[(u, v)] * p[(v, u)]).sqrt())
}

#[test]
fn discriminant_top_eigenvector_is_sqrt_pi() {
    let c = chain_of(&three_path());
    let d = discriminant(&c).unwrap();
    let ev = d.eigenvalues();
    let top = (0..ev.len()).max_by(|&a, &b| ev[a].total_cmp(&ev[b])).unwrap();
    assert!((ev[top] - 1.0).abs() < 1e-12);
    let sp = c.stationary().map(f64::sqrt);
    let dv = d.matrix() * &sp;
    assert!((dv - &sp).amax() < 1e-12);
    assert!(ev.iter().all(|x| x.abs() <= 1.0 + 1e-12));
}

#[test]
fn discriminant_rejects_nonreversible() {
    let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    let pi = DVector::from_element(3, 1.0 / 3.0);
    let c = ReversibleChain::from_parts(p, pi);
    assert!(matches!(discriminant(&c), Err(Error::NonReversible { .. })));
}

#[test]
fn szegedy_block_matches_discriminant() {
    let c = chain_of(&three_path());
    let w = szegedy_walk(&c).unwrap();
    assert_eq!(w.layout(), Layout { ancilla_dim: 4, system_dim: 3, flag: 0 });
    assert!(w.unitarity_residual() < 1e-12);
    assert!(verify_block_encoding(&w, &naive_d(&c)).unwrap() < 1e-12);
    // three-vertex path: D = [[0, 1/√2, 0], [1/√2, 0, 1/√2], [0, 1/√2, 0]]
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let expect = DMatrix::from_row_slice(3, 3, &[0.0, h, 0.0, h, 0.0, h, 0.0, h, 0.0]);
    assert!(verify_block_encoding(&w, &expect).unwrap() < 1e-12);
}

#[test]
fn szegedy_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [2, 4, 7, 10] {
        let g = random_connected_graph(n, 0.4, &mut rng);
        let c = build_chain(&g).unwrap();
        let op = SzegedyWalk::new(&c).unwrap();
        let w = BlockUnitary::materialize(&op).unwrap();
        assert!(w.unitarity_residual() < 1e-12);
        assert!(verify_block_encoding(&w, &naive_d(&c)).unwrap() < 1e-10);
        // matrix-free block agrees with the dense one
        assert!((op.block() - w.block()).amax() < 1e-14);
    }
}

#[test]
fn szegedy_size_cap() {
    let g = crate::graph::WeightedGraph::from_edges(
        64,
        &(0..63).map(|i| (i, i + 1, 1.0)).collect::<Vec<_>>(),
    )
    .unwrap();
    let c = build_chain(&g).unwrap();
    assert!(matches!(SzegedyWalk::new(&c), Err(Error::Size { .. })));
}

#[test]
fn interpolated_block_is_interpolated_discriminant() {
    let pr = three_path();
    let c = chain_of(&pr);
    let w = szegedy_walk(&c).unwrap();
    let marked = [false, false, true];
    for s in [0.0, 0.25, 0.5, 0.9] {
        let ws = interpolated_walk_unitary(&w, &marked, s).unwrap();
        assert_eq!(ws.calls(), CallCounts { walk: 1, check: 2, lambda: 0 });
        assert_eq!(ws.layout().ancilla_dim, 8);
        assert!(ws.unitarity_residual() < 1e-12);
        let ps = interpolate_absorbing(&c, &[2], s).unwrap();
        assert!(verify_block_encoding(&ws, &naive_d(&ps)).unwrap() < 1e-10, "s = {s}");
    }
    assert!(interpolated_walk_unitary(&w, &marked, 1.0).is_err());
}

#[test]
fn literal_left_bracket_flips_sign() {
    let pr = three_path();
    let c = chain_of(&pr);
    let w = szegedy_walk(&c).unwrap();
    let marked = [false, false, true];
    let s = 0.3;
    let op = InterpolatedWalk::new(Arc::new(w.clone()), &marked, s).unwrap();
    let theta = s.sqrt().acos() / 2.0;
    let (co, si) = (theta.cos(), theta.sin());
    let v = DMatrix::from_row_slice(2, 2, &[co, si, si, -co]);
    let y = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let wb = w.block();
    let n = 3;
    let mut lit = DMatrix::zeros(n, n);
    for v_out in 0..n {
        let cv = if marked[v_out] { &x } else { &DMatrix::identity(2, 2) };
        let left = &v * cv * &v * &y;
        for u in 0..n {
            let r = op.right_bracket(u);
            // q = 0 branch is the identity, q = 1 branch carries the walk block
            let mut e = left[(0, 1)] * r[1][0] * wb[(v_out, u)];
            if u == v_out {
                e += left[(0, 0)] * r[0][0];
            }
            lit[(v_out, u)] = e;
        }
    }
    let ps = interpolate_absorbing(&c, &[2], s).unwrap();
    assert!((lit + naive_d(&ps)).amax() < 1e-12);
    assert!((op.block() - naive_d(&ps)).amax() < 1e-12);
}

fn embedded_target(mi: &crate::electric::ModifiedInstance) -> DMatrix<f64> {
    let c = build_chain(&mi.graph).unwrap();
    let d = naive_d(&c);
    let emb = mi.system_embedding();
    let mut t = DMatrix::zeros(2 * mi.base_n, 2 * mi.base_n);
    for (i, &a) in emb.iter().enumerate() {
        for (j, &b) in emb.iter().enumerate() {
            t[(a, b)] = d[(i, j)];
        }
    }
    t
}

#[test]
fn modified_block_three_path() {
    let pr = three_path();
    let c = chain_of(&pr);
    let budget = 40.0 / 9.0;
    let mi = build_modified_instance(&pr.graph, &pr.sigma, &pr.marked, budget).unwrap();
    let w = szegedy_walk(&c).unwrap();
    let lam = lambda_unitary(&pr.sigma, c.stationary().as_slice(), budget).unwrap();
    assert!(lam.unitarity_residual() < 1e-14);
    let wm = modified_walk_unitary(&w, &lam).unwrap();
    assert_eq!(wm.calls(), CallCounts { walk: 1, check: 0, lambda: 2 });
    assert!(wm.unitarity_residual() < 1e-12);
    assert!(verify_block_encoding(&wm, &embedded_target(&mi)).unwrap() < 1e-10);
}

#[test]
fn modified_block_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [3, 5, 6] {
        let g = random_connected_graph(n, 0.5, &mut rng);
        let sigma = random_distribution_on(n, &[0, n - 2], &mut rng);
        let c = build_chain(&g).unwrap();
        for budget in [0.5, 3.0, 17.0] {
            let mi = build_modified_instance(&g, &sigma, &[n - 1], budget).unwrap();
            let op = ModifiedWalk::new(
                Arc::new(SzegedyWalk::new(&c).unwrap()),
                Lambda::new(&sigma, c.stationary().as_slice(), budget).unwrap(),
            )
            .unwrap();
            let wm = BlockUnitary::materialize(&op).unwrap();
            assert!(wm.unitarity_residual() < 1e-12);
            assert!(verify_block_encoding(&op, &embedded_target(&mi)).unwrap() < 1e-10);
            // the adjoint really is the inverse
            let mut e = DVector::zeros(op.layout().dim());
            e[3] = 1.0;
            assert!((op.apply_adjoint(&op.apply(&e)) - &e).amax() < 1e-12);
        }
    }
}

#[test]
fn lambda_roundtrip_and_rejection() {
    let pr = three_path();
    let pi = pr.graph.stationary();
    let lam = lambda_unitary(&pr.sigma, pi.probs(), 2.0).unwrap();
    let back = Lambda::from_unitary(&lam).unwrap();
    let direct = Lambda::new(&pr.sigma, pi.probs(), 2.0).unwrap();
    for u in 0..3 {
        assert!((back.alpha[u] - direct.alpha[u]).abs() < 1e-15);
        assert!((back.beta[u] - direct.beta[u]).abs() < 1e-15);
        assert!((direct.alpha[u].powi(2) + direct.beta[u].powi(2) - 1.0).abs() < 1e-14);
    }
    let mut m = lam.matrix().clone();
    m[(0, 1)] = 0.5;
    let bad = BlockUnitary::new(m, lam.layout(), lam.calls()).unwrap();
    assert!(Lambda::from_unitary(&bad).is_err());
    let zero_pi = [0.0, 0.5, 0.5];
    let point = Distribution::point(3, 1).unwrap();
    assert!(Lambda::new(&point, &zero_pi, 1.0).is_err());
    assert!(Lambda::new(&point, &[0.2, 0.3, 0.5], 0.0).is_err());
}

#[test]
fn state_measurement() {
    let layout = Layout { ancilla_dim: 2, system_dim: 2, flag: 0 };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let st = QuantumState::new(DVector::from_vec(vec![h, 0.0, 0.0, h]), layout).unwrap();
    assert!((st.measure_vertex(&[false, true]) - 0.0).abs() < 1e-15);
    assert!((st.vertex_marginal(&[false, true]) - 0.5).abs() < 1e-15);
    assert!(matches!(
        QuantumState::new(DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]), layout),
        Err(Error::Integrity(_))
    ));
    let c = chain_of(&three_path());
    let w = szegedy_walk(&c).unwrap();
    let psi = pr_sqrt_sigma();
    let st = QuantumState::flagged(w.layout(), &psi).unwrap();
    let out = apply_unitary(&w, &st).unwrap();
    let total: f64 = out.vertex_distribution().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

fn pr_sqrt_sigma() -> DVector<f64> {
    three_path().sigma.sqrt_vector()
}
