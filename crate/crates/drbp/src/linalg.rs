//! Small dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

/// Symmetric part `(M + Mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Symmetric square root via eigendecomposition; negative eigenvalues are
/// clipped to zero so near-PSD inputs stay real.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| if l > 0.0 { l.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Inverse of a symmetric positive-definite matrix via eigendecomposition.
pub fn inv_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| 1.0 / l);
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Elementwise positive part `max(z, 0)`.
pub fn pos(v: f64) -> f64 {
    v.max(0.0)
}

/// Elementwise negative part `max(-z, 0)`; `pos(z) + neg(z) = |z|`.
pub fn neg(v: f64) -> f64 {
    (-v).max(0.0)
}

/// Sum of absolute values of all entries.
pub fn abs_sum_mat(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// Sum of absolute values of a vector.
pub fn abs_sum_vec(v: &DVector<f64>) -> f64 {
    v.iter().map(|v| v.abs()).sum()
}

/// `xᵀ M y` for dense inputs.
pub fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (x.transpose() * m * y)[(0, 0)]
}

/// Frobenius inner product `⟨A, B⟩ = Σ Aᵢⱼ Bᵢⱼ`.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
