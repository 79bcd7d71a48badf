//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn ones(n: usize) -> CMat {
    CMat::from_element(n, n, C64::new(1.0, 0.0))
}

pub fn diag(entries: &[C64]) -> CMat {
    let n = entries.len();
    let mut m = zeros(n);
    for (i, &e) in entries.iter().enumerate() {
        m[(i, i)] = e;
    }
    m
}

pub fn real_diag(entries: &[f64]) -> CMat {
    diag(&entries.iter().map(|&e| C64::new(e, 0.0)).collect::<Vec<_>>())
}

/// Conjugate transpose.
pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// Frobenius norm.
pub fn norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn unitarity_defect(u: &CMat) -> f64 {
    norm(&(u.adjoint() * u - eye(u.nrows())))
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    norm(&(m - m.adjoint()))
}

pub fn hermitise(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn off_diagonal_max(m: &CMat) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let sv = m.clone().svd(false, false).singular_values;
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// 2-norm condition number; infinite when the matrix is exactly singular.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = singular_values(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

/// Nearest unitary matrix in Frobenius norm (unitary polar factor).
pub fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    u * v_t
}

/// Orthonormal basis (as columns) of the subspace spanned by the right
/// singular vectors of `m` with singular value below `tol`.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd v_t");
    let cols: Vec<_> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] < tol)
        .map(|i| v_t.row(i).adjoint())
        .collect();
    if cols.is_empty() {
        return CMat::zeros(n, 0);
    }
    CMat::from_columns(&cols)
}

/// Square root of a hermitian positive semidefinite matrix, and its inverse.
pub fn hermitian_inv_sqrt(m: &CMat) -> CMat {
    let eig = nalgebra::SymmetricEigen::new(hermitise(m));
    let mut d = zeros(m.nrows());
    for i in 0..m.nrows() {
        d[(i, i)] = C64::new(1.0 / eig.eigenvalues[i].max(f64::MIN_POSITIVE).sqrt(), 0.0);
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(hermitise(m));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Matrix exponential of `i H` for hermitian `H`.
pub fn unitary_from_hermitian(h: &CMat) -> CMat {
    let eig = nalgebra::SymmetricEigen::new(hermitise(h));
    let n = h.nrows();
    let mut d = zeros(n);
    for i in 0..n {
        d[(i, i)] = C64::from_polar(1.0, eig.eigenvalues[i]);
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

pub fn scale(m: &CMat, s: C64) -> CMat {
    m * s
}
