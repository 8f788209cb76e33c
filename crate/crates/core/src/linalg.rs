//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a: f64, &b| a.max(b))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a: f64, &b| a.max(b.abs()))
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(m.clone())
}

/// Orthogonal matrix whose first column is the unit vector `c`, built as a
/// single Householder reflection (so it is also symmetric).
pub fn householder_completion(c: &DVector<f64>) -> DMatrix<f64> {
    let n = c.len();
    let mut v = -c.clone();
    v[0] += 1.0;
    let nv2 = v.norm_squared();
    if nv2 < 1e-300 {
        return DMatrix::identity(n, n);
    }
    DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / nv2)
}

/// Orthogonality residual max|UᵀU − I|.
pub fn orthogonality_residual(u: &DMatrix<f64>) -> f64 {
    let n = u.ncols();
    max_abs(&(u.transpose() * u - DMatrix::identity(n, n)))
}

/// f(A)ψ for symmetric A given its eigendecomposition.
pub fn apply_spectral<F: Fn(f64) -> f64>(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    f: F,
    psi: &DVector<f64>,
) -> DVector<f64> {
    let coeffs = eig.eigenvectors.transpose() * psi;
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, &l)| c * f(l)),
    );
    &eig.eigenvectors * scaled
}

/// f(A) for symmetric A given its eigendecomposition.
pub fn spectral_matrix<F: Fn(f64) -> f64>(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    f: F,
) -> DMatrix<f64> {
    let q = &eig.eigenvectors;
    let diag = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    q * DMatrix::from_diagonal(&diag) * q.transpose()
}

/// Membership mask for a vertex list, rejecting out-of-range and repeated entries.
pub fn mask(n: usize, set: &[usize], what: &str) -> Result<Vec<bool>> {
    let mut m = vec![false; n];
    for &v in set {
        if v >= n {
            return Err(Error::InvalidSet(format!("{what}: vertex {v} out of range (n = {n})")));
        }
        if m[v] {
            return Err(Error::InvalidSet(format!("{what}: vertex {v} listed twice")));
        }
        m[v] = true;
    }
    Ok(m)
}

pub fn members(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn householder_first_column() {
        let c = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        let h = householder_completion(&c);
        assert!((h.column(0) - &c).norm() < 1e-15);
        assert!(orthogonality_residual(&h) < 1e-15);
        assert!(max_abs(&(&h - h.transpose())) < 1e-15);
    }

    #[test]
    fn householder_identity_case() {
        let c = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(householder_completion(&c), DMatrix::identity(2, 2));
    }

    #[test]
    fn spectral_norm_of_diag() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -3.0, 2.0]));
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mask_rejects_duplicates() {
        assert!(mask(3, &[0, 0], "M").is_err());
        assert!(mask(3, &[3], "M").is_err());
        assert_eq!(mask(3, &[2], "M").unwrap(), vec![false, false, true]);
    }
}
