//! Dense small-matrix algebra: exponentials, symmetric square roots,
//! log-determinants with phase tracking, Lyapunov solves.

mod eigen;
mod expm;
mod mat;
mod scalar;
mod sym;

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

pub use eigen::{complex_eigenvalues, real_eigenvalues, sym_apply, sym_eigen};
pub use expm::{expm, expm_taylor};
pub use mat::{Lu, Mat, SquareMat};
pub use scalar::{RealScalar, Scalar};
pub use sym::{CSymMat, MatrixJson, SymMat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("matrix dimension must be at least 1")]
    EmptyDimension,
    #[error("expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotSpd(f64),
    #[error("matrix has an eigenvalue with nonnegative real part ({0:e})")]
    Unstable(f64),
    #[error("matrix exponential overflows")]
    Overflow,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

/// True iff the smallest eigenvalue exceeds `tol`.
pub fn is_spd(a: &SymMat, tol: f64) -> bool {
    let (values, _) = sym_eigen(a);
    values[0] > tol
}

pub fn min_eigenvalue(a: &SymMat) -> f64 {
    sym_eigen(a).0[0]
}

/// Unique SPD square root via eigen-decomposition.
pub fn sqrtm_spd(a: &SymMat) -> Result<SymMat, MatError> {
    let (values, vectors) = sym_eigen(a);
    if values[0] <= 0.0 {
        return Err(MatError::NotSpd(values[0]));
    }
    Ok(sym_apply(&values, &vectors, f64::sqrt))
}

/// PSD square root with negative eigenvalues floored at zero.
pub fn sqrtm_psd_floor(a: &SymMat) -> SymMat {
    let (values, vectors) = sym_eigen(a);
    sym_apply(&values, &vectors, |x| x.max(0.0).sqrt())
}

/// Lower Cholesky factor L with L·Lᵀ = a.
pub fn cholesky(a: &SymMat) -> Result<SquareMat, MatError> {
    let n = a.dim();
    let mut l = Mat::zeros(n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 {
            return Err(MatError::NotSpd(d));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves m·X + X·mᵀ + c = 0 through the Kronecker-vectorised linear system.
pub fn solve_lyapunov(m: &SquareMat, c: &SymMat) -> Result<SymMat, MatError> {
    let n = m.dim();
    let worst = real_eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst >= 0.0 {
        return Err(MatError::Unstable(worst));
    }
    // vec(mX + Xmᵀ) = (I⊗m + m⊗I) vec(X) with row-major vec: index i*n + j.
    let nn = n * n;
    let mut k = Mat::zeros(nn);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for p in 0..n {
                k[(row, p * n + j)] += m[(i, p)];
                k[(row, i * n + p)] += m[(j, p)];
            }
        }
    }
    let mut rhs = Mat::zeros(nn);
    for i in 0..n {
        for j in 0..n {
            rhs[(i * n + j, 0)] = -c[(i, j)];
        }
    }
    let sol = k.solve(&rhs)?;
    let x = Mat::from_fn(n, |i, j| sol[(i * n + j, 0)]);
    Ok(SymMat::from_symmetric_part(&x))
}

/// log det(a) with the imaginary part placed on the branch nearest `prev_phase`.
///
/// Returns the log-determinant and the phase to pass to the next call.
pub fn logdet_tracked(a: &Mat<Complex64>, prev_phase: f64) -> Result<(Complex64, f64), MatError> {
    let lu = a.lu();
    if lu.is_singular() {
        return Err(MatError::Singular);
    }
    let mut log_abs = 0.0;
    let mut arg = if lu.sign() < 0.0 { PI } else { 0.0 };
    for z in lu.diag() {
        log_abs += z.norm().ln();
        arg += z.arg();
    }
    if log_abs < (1e-300f64).ln() || !log_abs.is_finite() {
        return Err(MatError::Singular);
    }
    let turns = ((prev_phase - arg) / (2.0 * PI)).round();
    let phase = arg + 2.0 * PI * turns;
    Ok((Complex64::new(log_abs, phase), phase))
}

/// Principal log-determinant: sum of principal logs of the eigenvalues.
pub fn logdet_principal(a: &Mat<Complex64>) -> Result<Complex64, MatError> {
    Ok(complex_eigenvalues(a)?.iter().map(|z| z.ln()).sum())
}
