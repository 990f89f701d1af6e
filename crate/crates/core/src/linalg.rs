//! Complex linear-algebra aliases and the few dense kernels the solvers share.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Relative ridge added to a singular Hermitian matrix before solving.
pub const RIDGE: f64 = 1e-12;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}


pub(crate) fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// Squared Euclidean norm.
pub fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b`.
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

/// Adds `scale * v v^H` to `acc`.
pub fn add_outer(acc: &mut CMat, v: &CVec, scale: f64) {
    let n = v.len();
    for j in 0..n {
        let vj = v[j].conj() * scale;
        for i in 0..n {
            acc[(i, j)] += v[i] * vj;
        }
    }
}

pub(crate) fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5)
}

fn real_trace(a: &CMat) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

/// Solves `K x_j = b_j` for a Hermitian positive semidefinite `K`.
///
/// When the Cholesky factorization fails a ridge of `RIDGE * trace(K) / n`
/// is added (growing by 10^3 per retry); the returned flag reports that the
/// system was regularized. An all-zero `K` yields all-zero solutions.
pub fn solve_hermitian(k: &CMat, rhs: &[CVec]) -> (Vec<CVec>, bool) {
    let n = k.nrows();
    let trace = real_trace(k);
    if n == 0 || !(trace > 0.0) {
        return (rhs.iter().map(|b| CVec::zeros(b.len())).collect(), true);
    }
    let herm = hermitian_part(k);
    if let Some(chol) = herm.clone().cholesky() {
        return (rhs.iter().map(|b| chol.solve(b)).collect(), false);
    }
    let mut ridge = RIDGE * trace / n as f64;
    loop {
        let mut reg = herm.clone();
        for i in 0..n {
            reg[(i, i)] += c(ridge);
        }
        if let Some(chol) = reg.cholesky() {
            return (rhs.iter().map(|b| chol.solve(b)).collect(), true);
        }
        ridge *= 1e3;
    }
}

/// Eigen-decomposition of a Hermitian positive semidefinite matrix with
/// eigenvalues clipped at zero.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(a: &CMat) -> Self {
        let eig = SymmetricEigen::new(hermitian_part(a));
        let values = eig.eigenvalues.iter().map(|&l| if l > 0.0 { l } else { 0.0 }).collect();
        HermitianEigen { values, vectors: eig.eigenvectors }
    }

    /// Coordinates of `v` in the eigenbasis.
    pub fn project(&self, v: &CVec) -> CVec {
        self.vectors.ad_mul(v)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}
