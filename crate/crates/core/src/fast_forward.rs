//! Quantum fast-forwarding: truncated Chebyshev expansion of x^t, the
//! controlled reflection ladder, and the LCU that block-encodes D^t.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quantum::{BlockUnitary, CallCounts, DiscriminantMatrix, Layout, WalkOperator, MAX_DENSE_DIM};

/// Largest power accepted; keeps binomials and ladder sizes sane.
pub const MAX_POWER: u64 = 1 << 20;
/// Largest ladder control register, in qubits.
pub const MAX_LADDER_QUBITS: u32 = 16;

/// x^t ≈ Σ_m c_m T_{deg(m)}(x), deg(m) = 2m (even t) or 2m+1 (odd t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevExpansion {
    t: u64,
    d: u64,
    coefficients: Vec<f64>,
    alpha: f64,
}

/// ln C(t, i) for i = 0..=t.
fn log_binomials(t: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(t as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=t {
        acc += ((t - i + 1) as f64).ln() - (i as f64).ln();
        out.push(acc);
    }
    out
}

pub fn truncation_degree(t: u64, eps: f64) -> Result<u64> {
    check_power(t)?;
    check_eps(eps)?;
    let mut d = (2.0 * t as f64 * (2.0 / eps).ln()).sqrt().ceil() as u64;
    if d % 2 != t % 2 {
        d += 1;
    }
    Ok(d.min(t))
}

fn check_power(t: u64) -> Result<()> {
    if t == 0 || t > MAX_POWER {
        return Err(Error::Domain(format!("power t = {t} outside [1, {MAX_POWER}]")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps = {eps} not in (0,1)")));
    }
    Ok(())
}

impl ChebyshevExpansion {
    /// Truncation of x^t to Chebyshev degree ≤ d (d with the parity of t).
    pub fn new(t: u64, d: u64) -> Result<Self> {
        check_power(t)?;
        if d % 2 != t % 2 {
            return Err(Error::Domain(format!("degree {d} and power {t} differ in parity")));
        }
        let d = d.min(t);
        let lb = log_binomials(t);
        let scale = t as f64 * std::f64::consts::LN_2;
        let odd = t % 2;
        let coefficients: Vec<f64> = (0..=(d - odd) / 2)
            .map(|m| {
                let k = 2 * m + odd;
                let w = (lb[((t + k) / 2) as usize] - scale).exp();
                if k == 0 {
                    w
                } else {
                    2.0 * w
                }
            })
            .collect();
        let alpha = coefficients.iter().sum();
        Ok(ChebyshevExpansion { t, d, coefficients, alpha })
    }

    pub fn for_precision(t: u64, eps: f64) -> Result<Self> {
        Self::new(t, truncation_degree(t, eps)?)
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_odd(&self) -> bool {
        self.t % 2 == 1
    }

    /// Folded coefficients c_m over the terms kept.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Chebyshev degree carried by the m-th coefficient.
    pub fn degree_of(&self, m: usize) -> u64 {
        2 * m as u64 + self.t % 2
    }

    /// Unfolded weight 2^{-t} C(t, (t+k)/2) of signed index k; 0 outside the truncation.
    pub fn weight(&self, k: i64) -> f64 {
        let a = k.unsigned_abs();
        if a > self.d || a % 2 != self.t % 2 {
            return 0.0;
        }
        let m = ((a - self.t % 2) / 2) as usize;
        if a == 0 {
            self.coefficients[m]
        } else {
            self.coefficients[m] / 2.0
        }
    }

    /// Number of ladder control qubits: smallest ℓ ≥ 1 with 2^ℓ above the top index.
    pub fn ell(&self) -> u32 {
        let top = self.coefficients.len();
        let mut ell = 1;
        while (1usize << ell) < top {
            ell += 1;
        }
        ell
    }

    /// p_{t,d}(x) by the Chebyshev recurrence.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("x = {x} outside [-1,1]")));
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        // (a, b) = (T_k(x), T_{k+1}(x))
        let (mut a, mut b) = (1.0, x);
        let mut sum = 0.0;
        for k in 0..=self.d {
            if k % 2 == self.t % 2 {
                sum += self.coefficients[(k / 2) as usize] * a;
            }
            (a, b) = (b, 2.0 * x * b - a);
        }
        sum
    }
}

pub fn eval_poly_scalar(exp: &ChebyshevExpansion, x: f64) -> Result<f64> {
    exp.eval(x)
}

/// I − 2|flag⟩⟨flag| ⊗ I.
fn reflect_flag(layout: Layout, x: &mut DVector<f64>) {
    let n = layout.system_dim;
    for s in 0..n {
        x[layout.index(layout.flag, s)] *= -1.0;
    }
}

fn check_hermitian_block(w: &dyn WalkOperator) -> Result<()> {
    let b = w.block();
    let r = linalg::max_abs(&(&b - b.transpose()));
    if r > 1e-10 {
        return Err(Error::Domain(format!("walk block is not Hermitian (residual {r:e})")));
    }
    Ok(())
}

fn dense_reflection_product(w: &BlockUnitary) -> DMatrix<f64> {
    let l = w.layout();
    let mut refl = DMatrix::identity(l.dim(), l.dim());
    for s in 0..l.system_dim {
        let i = l.index(l.flag, s);
        refl[(i, i)] = -1.0;
    }
    let m = w.matrix();
    &refl * m.transpose() * &refl * m
}

/// [(Ref ⊗ I) W† (Ref ⊗ I) W]^n, whose block is T_{2n}(D).
pub fn walk_power_reflections(w: &BlockUnitary, n: u32) -> Result<BlockUnitary> {
    check_hermitian_block(w)?;
    let g = dense_reflection_product(w);
    let l = w.layout();
    let mut acc = DMatrix::identity(l.dim(), l.dim());
    for _ in 0..n {
        acc = &g * acc;
    }
    BlockUnitary::new(acc, l, w.calls().times(2 * n as u64))
}

/// Σ_c |c⟩⟨c| ⊗ G^c over a 2^ℓ control register, applied gate by gate:
/// for each control qubit k, 2^k rounds of C_k W† C_k W.
#[derive(Clone)]
pub struct Ladder {
    w: Arc<dyn WalkOperator>,
    ell: u32,
}

impl Ladder {
    pub fn new(w: Arc<dyn WalkOperator>, ell: u32) -> Result<Self> {
        if ell == 0 || ell > MAX_LADDER_QUBITS {
            return Err(Error::Domain(format!("ℓ = {ell} outside [1, {MAX_LADDER_QUBITS}]")));
        }
        check_hermitian_block(w.as_ref())?;
        Ok(Ladder { w, ell })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn sectors(&self) -> usize {
        1 << self.ell
    }

    fn inner_dim(&self) -> usize {
        self.w.layout().dim()
    }

    fn map_sectors<F: Fn(usize, DVector<f64>) -> DVector<f64>>(&self, x: &mut DVector<f64>, f: F) {
        let d = self.inner_dim();
        for c in 0..self.sectors() {
            let part = x.rows(c * d, d).into_owned();
            x.rows_mut(c * d, d).copy_from(&f(c, part));
        }
    }

    fn run(&self, x: &DVector<f64>, adjoint: bool) -> DVector<f64> {
        let il = self.w.layout();
        let mut y = x.clone();
        let ks: Vec<u32> = if adjoint { (0..self.ell).rev().collect() } else { (0..self.ell).collect() };
        for k in ks {
            for _ in 0..(1u64 << k) {
                let on = |c: usize| c >> k & 1 == 1;
                if adjoint {
                    self.map_sectors(&mut y, |c, mut v| {
                        if on(c) {
                            reflect_flag(il, &mut v);
                        }
                        let mut v = self.w.apply(&v);
                        if on(c) {
                            reflect_flag(il, &mut v);
                        }
                        self.w.apply_adjoint(&v)
                    });
                } else {
                    self.map_sectors(&mut y, |c, v| {
                        let mut v = self.w.apply(&v);
                        if on(c) {
                            reflect_flag(il, &mut v);
                        }
                        let mut v = self.w.apply_adjoint(&v);
                        if on(c) {
                            reflect_flag(il, &mut v);
                        }
                        v
                    });
                }
            }
        }
        y
    }
}

impl WalkOperator for Ladder {
    fn layout(&self) -> Layout {
        let l = self.w.layout();
        Layout { ancilla_dim: self.sectors() * l.ancilla_dim, system_dim: l.system_dim, flag: l.flag }
    }
    fn calls(&self) -> CallCounts {
        self.w.calls().times(2 * (self.sectors() as u64 - 1))
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.run(x, false)
    }
    fn apply_adjoint(&self, x: &DVector<f64>) -> DVector<f64> {
        self.run(x, true)
    }
}

/// Dense 𝕌^{(ℓ)}, assembled sector by sector from powers of the reflection product.
pub fn controlled_walk_ladder(w: &BlockUnitary, ell: u32) -> Result<BlockUnitary> {
    let lad = Ladder::new(Arc::new(w.clone()), ell)?;
    let layout = lad.layout();
    let dim = layout.dim();
    if dim > MAX_DENSE_DIM {
        return Err(Error::Size { dim, cap: MAX_DENSE_DIM });
    }
    let g = dense_reflection_product(w);
    let d = w.layout().dim();
    let mut m = DMatrix::zeros(dim, dim);
    let mut acc = DMatrix::identity(d, d);
    for c in 0..lad.sectors() {
        m.view_mut((c * d, c * d), (d, d)).copy_from(&acc);
        acc = &g * acc;
    }
    BlockUnitary::new(m, layout, lad.calls())
}

/// Orthogonal R with first column √(c_m/α), padded to 2^ℓ.
pub fn prep_matrix(exp: &ChebyshevExpansion) -> DMatrix<f64> {
    let size = 1usize << exp.ell();
    let mut col = DVector::zeros(size);
    for (m, c) in exp.coefficients().iter().enumerate() {
        col[m] = (c / exp.alpha()).sqrt();
    }
    linalg::householder_completion(&col)
}

pub fn prep_unitary(exp: &ChebyshevExpansion) -> Result<BlockUnitary> {
    let r = prep_matrix(exp);
    let size = r.nrows();
    BlockUnitary::new(r, Layout { ancilla_dim: size, system_dim: 1, flag: 0 }, CallCounts::default())
}

/// U = (R† ⊗ I)·[W]·𝕌^{(ℓ)}·(R ⊗ I), with the extra W only for odd t.
#[derive(Clone)]
pub struct FastForward {
    w: Arc<dyn WalkOperator>,
    expansion: ChebyshevExpansion,
    prep: DMatrix<f64>,
    ladder: Ladder,
}

impl FastForward {
    pub fn new(w: Arc<dyn WalkOperator>, t: u64, eps: f64) -> Result<Self> {
        Self::with_expansion(w, ChebyshevExpansion::for_precision(t, eps)?)
    }

    pub fn with_expansion(w: Arc<dyn WalkOperator>, expansion: ChebyshevExpansion) -> Result<Self> {
        let ladder = Ladder::new(w.clone(), expansion.ell())?;
        let prep = prep_matrix(&expansion);
        Ok(FastForward { w, expansion, prep, ladder })
    }

    pub fn expansion(&self) -> &ChebyshevExpansion {
        &self.expansion
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ladder
    }

    /// Column-register mixing by R (or Rᵀ).
    pub fn mix_control(&self, x: &DVector<f64>, transpose: bool) -> DVector<f64> {
        let d = self.w.layout().dim();
        let k = self.prep.nrows();
        let mut y = DVector::zeros(x.len());
        for i in 0..k {
            for j in 0..k {
                let r = if transpose { self.prep[(j, i)] } else { self.prep[(i, j)] };
                if r != 0.0 {
                    y.rows_mut(i * d, d).axpy(r, &x.rows(j * d, d), 1.0);
                }
            }
        }
        y
    }

    fn walk_all(&self, x: &mut DVector<f64>, adjoint: bool) {
        let d = self.w.layout().dim();
        for c in 0..self.ladder.sectors() {
            let part = x.rows(c * d, d).into_owned();
            let out = if adjoint { self.w.apply_adjoint(&part) } else { self.w.apply(&part) };
            x.rows_mut(c * d, d).copy_from(&out);
        }
    }
}

impl WalkOperator for FastForward {
    fn layout(&self) -> Layout {
        self.ladder.layout()
    }
    fn calls(&self) -> CallCounts {
        let extra = if self.expansion.is_odd() { self.w.calls() } else { CallCounts::default() };
        self.ladder.calls() + extra
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let y = self.mix_control(x, false);
        let mut y = self.ladder.apply(&y);
        if self.expansion.is_odd() {
            self.walk_all(&mut y, false);
        }
        self.mix_control(&y, true)
    }
    fn apply_adjoint(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = self.mix_control(x, false);
        if self.expansion.is_odd() {
            self.walk_all(&mut y, true);
        }
        let y = self.ladder.apply_adjoint(&y);
        self.mix_control(&y, true)
    }
}

/// Dense fast-forwarding unitary; its block approximates D^t within 2·eps.
pub fn fast_forward_unitary(w: &BlockUnitary, t: u64, eps: f64) -> Result<BlockUnitary> {
    let ff = FastForward::new(Arc::new(w.clone()), t, eps)?;
    let layout = ff.layout();
    let dim = layout.dim();
    if dim > MAX_DENSE_DIM {
        return Err(Error::Size { dim, cap: MAX_DENSE_DIM });
    }
    let g = dense_reflection_product(w);
    let d = w.layout().dim();
    let k = ff.prep.nrows();
    let mut powers = Vec::with_capacity(k);
    let mut acc = DMatrix::identity(d, d);
    for _ in 0..k {
        powers.push(acc.clone());
        acc = &g * acc;
    }
    let mut u = DMatrix::zeros(dim, dim);
    for i in 0..k {
        for j in 0..k {
            let mut blk = DMatrix::zeros(d, d);
            for (m, gm) in powers.iter().enumerate() {
                let c = ff.prep[(m, i)] * ff.prep[(m, j)];
                if c != 0.0 {
                    blk += gm * c;
                }
            }
            if ff.expansion.is_odd() {
                blk = w.matrix() * blk;
            }
            u.view_mut((i * d, j * d), (d, d)).copy_from(&blk);
        }
    }
    BlockUnitary::new(u, layout, ff.calls())
}

/// p_{t,d}(D)/α, the exact block of the fast-forwarding unitary.
pub fn fast_forward_block(d: &DiscriminantMatrix, t: u64, eps: f64) -> Result<DMatrix<f64>> {
    let exp = ChebyshevExpansion::for_precision(t, eps)?;
    Ok(expansion_block(d, &exp))
}

pub fn expansion_block(d: &DiscriminantMatrix, exp: &ChebyshevExpansion) -> DMatrix<f64> {
    let a = exp.alpha();
    d.function_matrix(|x| exp.eval_unchecked(x.clamp(-1.0, 1.0)) / a)
}

/// D^t ψ by eigendecomposition.
pub fn apply_dt_exact(d: &DiscriminantMatrix, t: u64, psi: &DVector<f64>) -> DVector<f64> {
    d.apply_fn(|x| x.powi(t as i32), psi)
}
