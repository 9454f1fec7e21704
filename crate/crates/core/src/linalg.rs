//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Draw a vector of i.i.d. CN(0, variance) entries.
pub fn complex_gaussian<R: Rng + ?Sized>(len: usize, variance: f64, rng: &mut R) -> CVec {
    let scale = (variance / 2.0).sqrt();
    CVec::from_fn(len, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(scale * re, scale * im)
    })
}

/// Real part of the trace.
pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// Real part of tr(A·B) without forming the product.
pub fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Average `m` with its conjugate transpose.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted in
/// descending order. Ties keep the solver's original column order.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Solve `A X = B` for Hermitian positive definite `A`, falling back to LU
/// when the Cholesky factorization breaks down.
pub fn solve_hermitian(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::InvalidDimension(format!(
            "cannot solve {}x{} system against {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    if let Some(chol) = hermitian_part(a).cholesky() {
        return Ok(chol.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::NumericalDomain("singular system matrix".into()))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real_scale(m: &CMat, s: f64) -> CMat {
    m.map(|z| z * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let (vals, vecs) = hermitian_eigen(&m);
        assert_eq!(vals.len(), 3);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
        assert!((vecs[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solve_identity() {
        let a = identity(3).scale(2.0);
        let b = identity(3);
        let x = solve_hermitian(&a, &b).unwrap();
        assert!((x[(0, 0)].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn trace_product_matches_full_product() {
        let a = CMat::from_fn(3, 3, |i, j| Complex64::new(i as f64, j as f64 - 1.0));
        let b = CMat::from_fn(3, 3, |i, j| Complex64::new((i * j) as f64, 0.5));
        assert!((trace_product_re(&a, &b) - trace_re(&(&a * &b))).abs() < 1e-12);
    }
}
