//! Discriminant matrices, walk unitaries and the composite interpolated and
//! modified-graph walks, as matrix-free operators with dense materialization.

use std::ops::Add;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Distribution, ReversibleChain};
use crate::linalg;

/// Cap on the (n+1)·n pair space of a Szegedy walk.
pub const MAX_PAIR_DIM: usize = 4096;
/// Cap on the dimension of a materialized dense unitary.
pub const MAX_DENSE_DIM: usize = 4096;

/// Register layout: basis index = ancilla·system_dim + system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub ancilla_dim: usize,
    pub system_dim: usize,
    pub flag: usize,
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.ancilla_dim * self.system_dim
    }

    pub fn index(&self, ancilla: usize, system: usize) -> usize {
        ancilla * self.system_dim + system
    }
}

/// Base-operator invocations per application.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub walk: u64,
    pub check: u64,
    pub lambda: u64,
}

impl Add for CallCounts {
    type Output = CallCounts;
    fn add(self, o: CallCounts) -> CallCounts {
        CallCounts { walk: self.walk + o.walk, check: self.check + o.check, lambda: self.lambda + o.lambda }
    }
}

impl CallCounts {
    pub fn times(self, k: u64) -> CallCounts {
        CallCounts { walk: self.walk * k, check: self.check * k, lambda: self.lambda * k }
    }
}

/// A real orthogonal operator on a flagged ancilla ⊗ system space.
pub trait WalkOperator: Send + Sync {
    fn layout(&self) -> Layout;
    fn calls(&self) -> CallCounts;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
    fn apply_adjoint(&self, x: &DVector<f64>) -> DVector<f64>;

    /// (⟨flag| ⊗ I) U (|flag⟩ ⊗ I).
    fn block(&self) -> DMatrix<f64> {
        let l = self.layout();
        let n = l.system_dim;
        let mut b = DMatrix::zeros(n, n);
        for u in 0..n {
            let mut e = DVector::zeros(l.dim());
            e[l.index(l.flag, u)] = 1.0;
            let col = self.apply(&e);
            for v in 0..n {
                b[(v, u)] = col[l.index(l.flag, v)];
            }
        }
        b
    }
}

/// Dense unitary with a declared flag.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockUnitary {
    matrix: DMatrix<f64>,
    layout: Layout,
    calls: CallCounts,
}

impl BlockUnitary {
    pub fn new(matrix: DMatrix<f64>, layout: Layout, calls: CallCounts) -> Result<Self> {
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::Domain(format!(
                "matrix is {}x{}, layout needs {}",
                matrix.nrows(),
                matrix.ncols(),
                layout.dim()
            )));
        }
        if layout.flag >= layout.ancilla_dim {
            return Err(Error::Domain("flag outside the ancilla range".into()));
        }
        Ok(BlockUnitary { matrix, layout, calls })
    }

    /// Dense matrix of any operator, column by column.
    pub fn materialize(op: &dyn WalkOperator) -> Result<Self> {
        let l = op.layout();
        let dim = l.dim();
        if dim > MAX_DENSE_DIM {
            return Err(Error::Size { dim, cap: MAX_DENSE_DIM });
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = DVector::zeros(dim);
        for j in 0..dim {
            e[j] = 1.0;
            m.set_column(j, &op.apply(&e));
            e[j] = 0.0;
        }
        Ok(BlockUnitary { matrix: m, layout: l, calls: op.calls() })
    }

    pub fn identity(layout: Layout) -> Self {
        BlockUnitary { matrix: DMatrix::identity(layout.dim(), layout.dim()), layout, calls: CallCounts::default() }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// max |UᵀU − I|.
    pub fn unitarity_residual(&self) -> f64 {
        linalg::orthogonality_residual(&self.matrix)
    }
}

impl WalkOperator for BlockUnitary {
    fn layout(&self) -> Layout {
        self.layout
    }
    fn calls(&self) -> CallCounts {
        self.calls
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }
    fn apply_adjoint(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(x)
    }
    fn block(&self) -> DMatrix<f64> {
        let l = self.layout;
        let n = l.system_dim;
        self.matrix.view((l.flag * n, l.flag * n), (n, n)).into_owned()
    }
}

/// ‖block(U) − target‖ in spectral norm.
pub fn verify_block_encoding(u: &dyn WalkOperator, target: &DMatrix<f64>) -> Result<f64> {
    let b = u.block();
    if b.shape() != target.shape() {
        return Err(Error::Domain(format!("block is {:?}, target is {:?}", b.shape(), target.shape())));
    }
    Ok(linalg::spectral_norm(&(b - target)))
}

/// D = √(P∘Pᵀ) with its eigendecomposition.
#[derive(Clone, Debug)]
pub struct DiscriminantMatrix {
    d: DMatrix<f64>,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl DiscriminantMatrix {
    /// Wraps a symmetric matrix (e.g. one assembled from block formulas).
    pub fn from_symmetric(d: DMatrix<f64>) -> Result<Self> {
        if d.nrows() != d.ncols() {
            return Err(Error::Domain("discriminant must be square".into()));
        }
        let asym = linalg::max_abs(&(&d - d.transpose()));
        if asym > 1e-10 {
            return Err(Error::Domain(format!("matrix is not symmetric (residual {asym:e})")));
        }
        let d = (&d + d.transpose()) * 0.5;
        let eig = linalg::sym_eigen(&d);
        Ok(DiscriminantMatrix { d, eig })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eig.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eig.eigenvectors
    }

    /// f(D)ψ.
    pub fn apply_fn<F: Fn(f64) -> f64>(&self, f: F, psi: &DVector<f64>) -> DVector<f64> {
        linalg::apply_spectral(&self.eig, f, psi)
    }

    /// f(D).
    pub fn function_matrix<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        linalg::spectral_matrix(&self.eig, f)
    }
}

pub fn discriminant(c: &ReversibleChain) -> Result<DiscriminantMatrix> {
    let n = c.n();
    let p = c.transition();
    let pi = c.stationary();
    let mut d = DMatrix::zeros(n, n);
    let mut worst: f64 = 0.0;
    for u in 0..n {
        for v in 0..n {
            let a = (p[(u, v)] * p[(v, u)]).sqrt();
            let b = pi[u].sqrt() * p[(u, v)] / pi[v].sqrt();
            worst = worst.max((a - b).abs());
            d[(u, v)] = a;
        }
    }
    if worst > 1e-12 {
        return Err(Error::NonReversible { residual: worst });
    }
    DiscriminantMatrix::from_symmetric(d)
}

/// Szegedy walk V(P)†·Shift·V(P) on ancilla {0̄} ∪ X (0̄ at index 0, v at v+1).
/// V(P) is, per vertex u, the Householder reflection taking |0̄⟩ to Σ_v √P_{u,v}|v⟩.
#[derive(Clone, Debug)]
pub struct SzegedyWalk {
    n: usize,
    /// Householder vectors h_u with ‖h_u‖² = 2, so V_u = I − h_u h_uᵀ.
    reflectors: Vec<DVector<f64>>,
}

impl SzegedyWalk {
    pub fn new(c: &ReversibleChain) -> Result<Self> {
        let n = c.n();
        let dim = (n + 1) * n;
        if dim > MAX_PAIR_DIM {
            return Err(Error::Size { dim, cap: MAX_PAIR_DIM });
        }
        let p = c.transition();
        let reflectors = (0..n)
            .map(|u| {
                let mut h = DVector::zeros(n + 1);
                h[0] = 1.0;
                for v in 0..n {
                    h[v + 1] = -p[(u, v)].sqrt();
                }
                // e_0 − c has squared norm 2 because c ⟂ e_0 and ‖c‖ = 1
                let s = (2.0 / h.norm_squared()).sqrt();
                h * s
            })
            .collect();
        Ok(SzegedyWalk { n, reflectors })
    }

    fn apply_v(&self, x: &mut DVector<f64>) {
        let n = self.n;
        for u in 0..n {
            let h = &self.reflectors[u];
            let mut dot = 0.0;
            for a in 0..=n {
                dot += h[a] * x[a * n + u];
            }
            for a in 0..=n {
                x[a * n + u] -= h[a] * dot;
            }
        }
    }

    fn apply_shift(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut y = x.clone();
        for u in 0..n {
            for v in 0..n {
                y[(v + 1) * n + u] = x[(u + 1) * n + v];
            }
        }
        y
    }
}

impl WalkOperator for SzegedyWalk {
    fn layout(&self) -> Layout {
        Layout { ancilla_dim: self.n + 1, system_dim: self.n, flag: 0 }
    }
    fn calls(&self) -> CallCounts {
        CallCounts { walk: 1, ..Default::default() }
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x.clone();
        self.apply_v(&mut y);
        let mut z = self.apply_shift(&y);
        self.apply_v(&mut z);
        z
    }
    fn apply_adjoint(&self, x: &DVector<f64>) -> DVector<f64> {
        // V and Shift are symmetric involutions, so W is self-adjoint
        self.apply(x)
    }
}

pub fn szegedy_walk(c: &ReversibleChain) -> Result<BlockUnitary> {
    BlockUnitary::materialize(&SzegedyWalk::new(c)?)
}

type Qubit = [[f64; 2]; 2];

fn mul2(a: &Qubit, b: &Qubit) -> Qubit {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn transpose2(a: &Qubit) -> Qubit {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Interpolated walk: one control qubit q (register order A ⊗ q ⊗ X), flag (flag_A, 0).
/// R = (YV)·C·V prepares the holding amplitude; the walk runs on q = 1; R† undoes R.
#[derive(Clone)]
pub struct InterpolatedWalk {
    inner: Arc<dyn WalkOperator>,
    marked: Vec<bool>,
    s: f64,
    /// R for unmarked and marked vertices.
    right: [Qubit; 2],
}

impl InterpolatedWalk {
    pub fn new(inner: Arc<dyn WalkOperator>, marked: &[bool], s: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::Domain(format!("s = {s} not in [0,1)")));
        }
        if marked.len() != inner.layout().system_dim {
            return Err(Error::Domain("membership map does not match the system register".into()));
        }
        let theta = s.sqrt().acos() / 2.0;
        let (c, sn) = (theta.cos(), theta.sin());
        let v: Qubit = [[c, sn], [sn, -c]];
        let x: Qubit = [[0.0, 1.0], [1.0, 0.0]];
        let y: Qubit = [[0.0, 1.0], [-1.0, 0.0]];
        let yv = mul2(&y, &v);
        let right = [mul2(&yv, &v), mul2(&yv, &mul2(&x, &v))];
        Ok(InterpolatedWalk { inner, marked: marked.to_vec(), s, right })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// The per-vertex right bracket R on the control qubit.
    pub fn right_bracket(&self, u: usize) -> [[f64; 2]; 2] {
        self.right[self.marked[u] as usize]
    }

    fn apply_qubit(&self, x: &mut DVector<f64>, adjoint: bool) {
        let l = self.inner.layout();
        let n = l.system_dim;
        for a in 0..l.ancilla_dim {
            for u in 0..n {
                let g = if adjoint { transpose2(&self.right_bracket(u)) } else { self.right_bracket(u) };
                let i0 = (a * 2) * n + u;
                let i1 = (a * 2 + 1) * n + u;
                let (x0, x1) = (x[i0], x[i1]);
                x[i0] = g[0][0] * x0 + g[0][1] * x1;
                x[i1] = g[1][0] * x0 + g[1][1] * x1;
            }
        }
    }

    fn controlled_inner(&self, x: &DVector<f64>, adjoint: bool) -> DVector<f64> {
        let l = self.inner.layout();
        let n = l.system_dim;
        let mut sub = DVector::zeros(l.dim());
        for a in 0..l.ancilla_dim {
            for u in 0..n {
                sub[a * n + u] = x[(a * 2 + 1) * n + u];
            }
        }
        let sub = if adjoint { self.inner.apply_adjoint(&sub) } else { self.inner.apply(&sub) };
        let mut y = x.clone();
        for a in 0..l.ancilla_dim {
            for u in 0..n {
                y[(a * 2 + 1) * n + u] = sub[a * n + u];
            }
        }
        y
    }
}

impl WalkOperator for InterpolatedWalk {
    fn layout(&self) -> Layout {
        let l = self.inner.layout();
        Layout { ancilla_dim: 2 * l.ancilla_dim, system_dim: l.system_dim, flag: 2 * l.flag }
    }
    fn calls(&self) -> CallCounts {
        self.inner.calls() + CallCounts { check: 2, ..Default::default() }
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x.clone();
        self.apply_qubit(&mut y, false);
        let mut z = self.controlled_inner(&y, false);
        self.apply_qubit(&mut z, true);
        z
    }
    fn apply_adjoint(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x.clone();
        self.apply_qubit(&mut y, false);
        let mut z = self.controlled_inner(&y, true);
        self.apply_qubit(&mut z, true);
        z
    }
}

pub fn interpolated_walk_unitary(w: &BlockUnitary, marked: &[bool], s: f64) -> Result<BlockUnitary> {
    BlockUnitary::materialize(&InterpolatedWalk::new(Arc::new(w.clone()), marked, s)?)
}

/// Λ(σ, C): per vertex, |0⟩_a ↦ (√π_u|0⟩ + √(σ_u/C)|1⟩)/√(π_u + σ_u/C).
#[derive(Clone, Debug, PartialEq)]
pub struct Lambda {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Lambda {
    pub fn new(sigma: &Distribution, pi: &[f64], budget: f64) -> Result<Self> {
        if !(budget > 0.0) {
            return Err(Error::Domain(format!("C must be positive, got {budget}")));
        }
        if sigma.len() != pi.len() {
            return Err(Error::Domain("σ and π lengths differ".into()));
        }
        let mut alpha = Vec::with_capacity(pi.len());
        let mut beta = Vec::with_capacity(pi.len());
        for u in 0..pi.len() {
            let a = pi[u];
            let b = sigma.get(u) / budget;
            if a + b <= 0.0 {
                return Err(Error::Domain(format!("π_u + σ_u/C = 0 at vertex {u}")));
            }
            alpha.push((a / (a + b)).sqrt());
            beta.push((b / (a + b)).sqrt());
        }
        Ok(Lambda { alpha, beta })
    }

    /// Reads α, β back from a dense Λ, rejecting anything that is not a
    /// vertex-controlled qubit rotation.
    pub fn from_unitary(u: &BlockUnitary) -> Result<Self> {
        let l = u.layout();
        let n = l.system_dim;
        if l.ancilla_dim != 2 || l.flag != 0 {
            return Err(Error::Domain("Λ must act on one flag qubit".into()));
        }
        let m = u.matrix();
        for i in 0..2 * n {
            for j in 0..2 * n {
                if i % n != j % n && m[(i, j)].abs() > 1e-12 {
                    return Err(Error::Domain("Λ is not controlled on the vertex register".into()));
                }
            }
        }
        Ok(Lambda { alpha: (0..n).map(|v| m[(v, v)]).collect(), beta: (0..n).map(|v| m[(n + v, v)]).collect() })
    }

    fn gate(&self, u: usize) -> Qubit {
        [[self.alpha[u], -self.beta[u]], [self.beta[u], self.alpha[u]]]
    }
}

pub fn lambda_unitary(sigma: &Distribution, pi: &[f64], budget: f64) -> Result<BlockUnitary> {
    let lam = Lambda::new(sigma, pi, budget)?;
    let n = pi.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for u in 0..n {
        let g = lam.gate(u);
        for i in 0..2 {
            for j in 0..2 {
                m[(i * n + u, j * n + u)] = g[i][j];
            }
        }
    }
    BlockUnitary::new(m, Layout { ancilla_dim: 2, system_dim: n, flag: 0 }, CallCounts { lambda: 1, ..Default::default() })
}

/// Walk on the two-layer graph: (I ⊗ c̄_bΛ†)·c̄_{ab}W·(I ⊗ (SWAP_ab ⊗ I)·c̄_bΛ),
/// register order A ⊗ a ⊗ b ⊗ X; ancilla = (A, a), system = (b, u).
#[derive(Clone)]
pub struct ModifiedWalk {
    inner: Arc<dyn WalkOperator>,
    lambda: Lambda,
}

impl ModifiedWalk {
    pub fn new(inner: Arc<dyn WalkOperator>, lambda: Lambda) -> Result<Self> {
        if lambda.alpha.len() != inner.layout().system_dim {
            return Err(Error::Domain("Λ does not match the system register".into()));
        }
        Ok(ModifiedWalk { inner, lambda })
    }

    fn idx(&self, big_a: usize, a: usize, b: usize, u: usize) -> usize {
        let n = self.inner.layout().system_dim;
        ((big_a * 2 + a) * 2 + b) * n + u
    }

    /// c̄_bΛ (or its adjoint) on qubit a for b = 0.
    fn apply_lambda(&self, x: &mut DVector<f64>, adjoint: bool) {
        let l = self.inner.layout();
        for big_a in 0..l.ancilla_dim {
            for u in 0..l.system_dim {
                let g = self.lambda.gate(u);
                let g = if adjoint { transpose2(&g) } else { g };
                let i0 = self.idx(big_a, 0, 0, u);
                let i1 = self.idx(big_a, 1, 0, u);
                let (x0, x1) = (x[i0], x[i1]);
                x[i0] = g[0][0] * x0 + g[0][1] * x1;
                x[i1] = g[1][0] * x0 + g[1][1] * x1;
            }
        }
    }

    fn swap_ab(&self, x: &mut DVector<f64>) {
        let l = self.inner.layout();
        for big_a in 0..l.ancilla_dim {
            for u in 0..l.system_dim {
                let i = self.idx(big_a, 0, 1, u);
                let j = self.idx(big_a, 1, 0, u);
                x.swap_rows(i, j);
            }
        }
    }

    fn controlled_inner(&self, x: &DVector<f64>, adjoint: bool) -> DVector<f64> {
        let l = self.inner.layout();
        let n = l.system_dim;
        let mut sub = DVector::zeros(l.dim());
        for big_a in 0..l.ancilla_dim {
            for u in 0..n {
                sub[big_a * n + u] = x[self.idx(big_a, 0, 0, u)];
            }
        }
        let sub = if adjoint { self.inner.apply_adjoint(&sub) } else { self.inner.apply(&sub) };
        let mut y = x.clone();
        for big_a in 0..l.ancilla_dim {
            for u in 0..n {
                y[self.idx(big_a, 0, 0, u)] = sub[big_a * n + u];
            }
        }
        y
    }
}

impl WalkOperator for ModifiedWalk {
    fn layout(&self) -> Layout {
        let l = self.inner.layout();
        Layout { ancilla_dim: 2 * l.ancilla_dim, system_dim: 2 * l.system_dim, flag: 2 * l.flag }
    }
    fn calls(&self) -> CallCounts {
        self.inner.calls() + CallCounts { lambda: 2, ..Default::default() }
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x.clone();
        self.apply_lambda(&mut y, false);
        self.swap_ab(&mut y);
        let mut z = self.controlled_inner(&y, false);
        self.apply_lambda(&mut z, true);
        z
    }
    fn apply_adjoint(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x.clone();
        self.apply_lambda(&mut y, false);
        let mut z = self.controlled_inner(&y, true);
        self.swap_ab(&mut z);
        self.apply_lambda(&mut z, true);
        z
    }
}

pub fn modified_walk_unitary(w: &BlockUnitary, lambda: &BlockUnitary) -> Result<BlockUnitary> {
    let lam = Lambda::from_unitary(lambda)?;
    BlockUnitary::materialize(&ModifiedWalk::new(Arc::new(w.clone()), lam)?)
}

/// Unit-norm real state over a register layout.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    amplitudes: DVector<f64>,
    layout: Layout,
}

impl QuantumState {
    pub fn new(amplitudes: DVector<f64>, layout: Layout) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::Domain("state length does not match layout".into()));
        }
        let drift = (amplitudes.norm() - 1.0).abs();
        if drift > 1e-8 {
            return Err(Error::Integrity(format!("state norm drifts from 1 by {drift:e}")));
        }
        Ok(QuantumState { amplitudes, layout })
    }

    /// |flag⟩ ⊗ ψ for a unit vector ψ on the system register.
    pub fn flagged(layout: Layout, psi: &DVector<f64>) -> Result<Self> {
        if psi.len() != layout.system_dim {
            return Err(Error::Domain("system vector length mismatch".into()));
        }
        let mut a = DVector::zeros(layout.dim());
        a.rows_mut(layout.flag * layout.system_dim, layout.system_dim).copy_from(psi);
        Self::new(a, layout)
    }

    pub fn amplitudes(&self) -> &DVector<f64> {
        &self.amplitudes
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// ‖(⟨flag| ⊗ Π_subset)ψ‖².
    pub fn measure_vertex(&self, subset: &[bool]) -> f64 {
        let l = self.layout;
        (0..l.system_dim)
            .filter(|&s| subset[s])
            .map(|s| self.amplitudes[l.index(l.flag, s)].powi(2))
            .sum()
    }

    /// Probability of a system outcome in `subset`, ancilla traced out.
    pub fn vertex_marginal(&self, subset: &[bool]) -> f64 {
        self.vertex_distribution().iter().zip(subset).filter(|(_, &b)| b).map(|(p, _)| p).sum()
    }

    /// Distribution of the system register, ancilla traced out.
    pub fn vertex_distribution(&self) -> Vec<f64> {
        let l = self.layout;
        let mut p = vec![0.0; l.system_dim];
        for a in 0..l.ancilla_dim {
            for (s, ps) in p.iter_mut().enumerate() {
                *ps += self.amplitudes[l.index(a, s)].powi(2);
            }
        }
        p
    }
}

pub fn apply_unitary(u: &dyn WalkOperator, state: &QuantumState) -> Result<QuantumState> {
    if u.layout() != state.layout {
        return Err(Error::Domain("operator and state layouts differ".into()));
    }
    QuantumState::new(u.apply(&state.amplitudes), state.layout)
}

#[cfg(test)]
mod tests;
