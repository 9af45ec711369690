//! Small dense Hermitian helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        let sym = hermitian_part(m);
        let eig = sym.symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
        Self { values, vectors }
    }

    /// `U f(Λ) U†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = DVector::from_iterator(self.values.len(), self.values.iter().map(|&x| cr(f(x))));
        let scaled = &self.vectors * DMatrix::from_diagonal(&d);
        scaled * self.vectors.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Ratio of the largest to smallest eigenvalue magnitude.
    pub fn condition(&self) -> f64 {
        let lo = self.values.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        let hi = self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entry of `m - m†` in modulus.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let d = m - m.adjoint();
    d.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Eigenvalues below zero (round-off) are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    HermitianEigen::new(m).map(|x| x.max(0.0).sqrt())
}

/// Solves `X A + A X = C` for Hermitian positive definite `A` given its
/// eigen-decomposition. Solved elementwise in the eigenbasis of `A`.
pub fn solve_lyapunov(a: &HermitianEigen, rhs: &CMatrix) -> CMatrix {
    let u = &a.vectors;
    let mut x = u.adjoint() * rhs * u;
    let n = a.values.len();
    for i in 0..n {
        for j in 0..n {
            x[(i, j)] /= a.values[i] + a.values[j];
        }
    }
    u * x * u.adjoint()
}

/// Trace norm (sum of singular values).
pub fn trace_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().sum()
}

pub fn real_symmetric_eigenvalues(m: &RMatrix) -> Vec<f64> {
    let sym = (m + m.transpose()).scale(0.5);
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn frobenius(m: &RMatrix) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}
