//! Dense complex matrix helpers shared by the spectral and calculus modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const SCHUR_MAX_ITERATIONS: usize = 10_000;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds an `n×n` matrix from real row-major entries.
pub fn real_matrix(n: usize, rows: &[f64]) -> CMatrix {
    assert_eq!(rows.len(), n * n, "expected {} entries", n * n);
    CMatrix::from_row_iterator(n, n, rows.iter().map(|&v| c(v, 0.0)))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Complex Schur form `A = Q T Q^H`, returned as `(Q, T)`.
pub fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let decomposition = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITERATIONS)
        .ok_or(Error::EigenSolverFailed)?;
    Ok(decomposition.unpack())
}

pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let (_, t) = schur(m)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Solves `(z I - A) X = I`.
pub fn resolvent(m: &CMatrix, z: Complex64) -> Result<CMatrix> {
    let n = m.nrows();
    let shifted = CMatrix::from_diagonal_element(n, n, z) - m;
    shifted.try_inverse().ok_or(Error::SingularResolvent(z))
}

pub fn matvec(m: &CMatrix, v: &CVector) -> CVector {
    m * v
}

/// `e^{2πi·r/period}` with the residue reduced first, keeping the phase exact
/// for large integer arguments.
pub fn unit_phase(numerator: i64, period: usize) -> Complex64 {
    let period_i = period as i64;
    let r = numerator.rem_euclid(period_i);
    let angle = 2.0 * std::f64::consts::PI * (r as f64) / (period as f64);
    Complex64::from_polar(1.0, angle)
}

/// `e^{2πiωt}` for an arbitrary real frequency.
pub fn frequency_phase(omega: f64, t: i64) -> Complex64 {
    let turns = (omega * t as f64).rem_euclid(1.0);
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * turns)
}
