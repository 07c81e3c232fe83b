use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::mat::{Mat, SquareMat};
use super::MatError;

/// Real symmetric matrix. Symmetry is enforced on every constructor.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat(Mat<f64>);

/// Complex symmetric (not Hermitian) matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CSymMat(Mat<Complex64>);

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat(Mat::zeros(n))
    }

    pub fn identity(n: usize) -> Self {
        SymMat(Mat::identity(n))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        SymMat(Mat::from_diag(diag))
    }

    /// Rejects inputs whose asymmetry exceeds `1e-12 * (1 + ‖a‖_F)`, then symmetrizes.
    pub fn new(a: SquareMat) -> Result<Self, MatError> {
        if !a.is_finite() {
            return Err(MatError::NonFinite);
        }
        let asym = a.max_asymmetry();
        if asym > 1e-12 * (1.0 + a.frobenius()) {
            return Err(MatError::NotSymmetric(asym));
        }
        Ok(SymMat(a.symmetrized()))
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self, MatError> {
        Self::new(Mat::from_row_major(n, data)?)
    }

    /// Symmetrizes unconditionally; for results that are symmetric in exact arithmetic.
    pub fn from_symmetric_part(a: &SquareMat) -> Self {
        SymMat(a.symmetrized())
    }

    pub fn as_mat(&self) -> &SquareMat {
        &self.0
    }

    pub fn into_mat(self) -> SquareMat {
        self.0
    }

    pub fn scale(&self, a: f64) -> SymMat {
        SymMat(self.0.scale(a))
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        SymMat(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        SymMat(&self.0 - &other.0)
    }

    /// a · self · aᵀ, symmetric by construction.
    pub fn congruence(&self, a: &SquareMat) -> SymMat {
        SymMat::from_symmetric_part(&(a * &self.0 * a.transpose()))
    }

    pub fn to_complex(&self) -> CSymMat {
        CSymMat(self.0.to_complex())
    }

    /// Half-vectorisation (row-major upper triangle).
    pub fn vech(&self) -> Vec<f64> {
        let n = self.dim();
        let mut v = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                v.push(self[(i, j)]);
            }
        }
        v
    }
}

impl Deref for SymMat {
    type Target = Mat<f64>;
    fn deref(&self) -> &Mat<f64> {
        &self.0
    }
}

impl CSymMat {
    pub fn zeros(n: usize) -> Self {
        CSymMat(Mat::zeros(n))
    }

    pub fn new(a: Mat<Complex64>) -> Result<Self, MatError> {
        if !a.is_finite() {
            return Err(MatError::NonFinite);
        }
        let asym = a.max_asymmetry();
        if asym > 1e-12 * (1.0 + a.frobenius()) {
            return Err(MatError::NotSymmetric(asym));
        }
        Ok(CSymMat(a.symmetrized()))
    }

    pub fn from_symmetric_part(a: &Mat<Complex64>) -> Self {
        CSymMat(a.symmetrized())
    }

    pub fn from_real(a: &SymMat) -> Self {
        a.to_complex()
    }

    pub fn as_mat(&self) -> &Mat<Complex64> {
        &self.0
    }

    pub fn into_mat(self) -> Mat<Complex64> {
        self.0
    }

    /// Real part; `None` if any imaginary part exceeds `tol`.
    pub fn to_real(&self, tol: f64) -> Option<SymMat> {
        if self.0.as_slice().iter().any(|z| z.im.abs() > tol) {
            return None;
        }
        Some(SymMat(self.0.re()))
    }

    pub fn re(&self) -> SymMat {
        SymMat(self.0.re())
    }
}

impl Deref for CSymMat {
    type Target = Mat<Complex64>;
    fn deref(&self) -> &Mat<Complex64> {
        &self.0
    }
}

/// JSON form: explicit dimension plus row-major entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl From<&SquareMat> for MatrixJson {
    fn from(m: &SquareMat) -> Self {
        MatrixJson {
            dim: m.dim(),
            data: m.as_slice().to_vec(),
        }
    }
}

impl From<&SymMat> for MatrixJson {
    fn from(m: &SymMat) -> Self {
        MatrixJson::from(m.as_mat())
    }
}

impl TryFrom<&MatrixJson> for SquareMat {
    type Error = MatError;
    fn try_from(j: &MatrixJson) -> Result<Self, MatError> {
        Mat::from_row_major(j.dim, j.data.clone())
    }
}

impl TryFrom<&MatrixJson> for SymMat {
    type Error = MatError;
    fn try_from(j: &MatrixJson) -> Result<Self, MatError> {
        SymMat::from_row_major(j.dim, j.data.clone())
    }
}
