//! Affine transform engine: φ_τ(u), ψ_τ(u) such that
//! E[exp(-tr[uΣ_τ])] = exp(-φ_τ(u) - tr[ψ_τ(u)Σ_0]).

mod jump;
mod params;
pub mod quadrature;
mod wishart;

use num_complex::Complex64;
use qd::Quad;
use thiserror::Error;

use crate::matcore::{CSymMat, Mat, MatError, SymMat};

pub use jump::{JumpHorizon, JumpHorizonHp, PHI_MAX_NODES, PHI_TOL};
pub use params::{correlated_q, JumpLaw, JumpOuParams, WishartParams};
pub(crate) use wishart::riccati_rk4;
pub use wishart::{ComplexEval, WishartHorizon};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffineError {
    #[error("negative horizon tau = {0}")]
    NegativeTau(f64),
    #[error("kappa = {kappa} violates kappa >= d + 1 = {}", dim + 1)]
    Gindikin { kappa: f64, dim: usize },
    #[error("initial state is not positive definite (smallest eigenvalue {0:e})")]
    NotSpd(f64),
    #[error("mean reversion M is not stable (max real eigenvalue part {0:e})")]
    Unstable(f64),
    #[error("volatility matrix Q is singular")]
    SingularQ,
    #[error("correlation |rho| = {0} must be below 1")]
    Correlation(f64),
    #[error("jump intensity must be finite and nonnegative, got {0}")]
    Intensity(f64),
    #[error("invalid jump law: {0}")]
    JumpLaw(String),
    #[error("parameter dimensions disagree")]
    Dimension,
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// φ and ψ at one (τ, u).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCoeffs {
    pub phi: Complex64,
    pub psi: CSymMat,
    pub tau: f64,
    /// False when the transform is infinite at (τ, u).
    pub valid: bool,
    /// Log-det phase for chaining the next evaluation along a path.
    pub phase: f64,
}

impl AffineCoeffs {
    fn invalid(tau: f64, dim: usize, phase: f64) -> Self {
        AffineCoeffs {
            phi: Complex64::new(0.0, 0.0),
            psi: CSymMat::zeros(dim),
            tau,
            valid: false,
            phase,
        }
    }
}

/// Real-argument coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RealCoeffs {
    pub phi: f64,
    pub psi: SymMat,
}

/// Either of the supported state processes.
#[derive(Debug, Clone, PartialEq)]
pub enum AffineModel {
    Wishart(WishartParams),
    JumpOu(JumpOuParams),
}

impl From<WishartParams> for AffineModel {
    fn from(p: WishartParams) -> Self {
        AffineModel::Wishart(p)
    }
}

impl From<JumpOuParams> for AffineModel {
    fn from(p: JumpOuParams) -> Self {
        AffineModel::JumpOu(p)
    }
}

/// Transform evaluator with horizon-dependent work done once.
#[derive(Debug, Clone)]
pub enum Horizon {
    Wishart(WishartHorizon<f64>),
    JumpOu(JumpHorizon),
}

/// Double-double transform evaluator for real arguments.
#[derive(Debug, Clone)]
pub enum HorizonHp {
    Wishart(WishartHorizon<Quad>),
    JumpOu(JumpHorizonHp),
}

impl AffineModel {
    pub fn dim(&self) -> usize {
        self.sigma0().dim()
    }

    pub fn sigma0(&self) -> &SymMat {
        match self {
            AffineModel::Wishart(p) => p.sigma0(),
            AffineModel::JumpOu(p) => p.sigma0(),
        }
    }

    pub fn horizon(&self, tau: f64) -> Result<Horizon, AffineError> {
        Ok(match self {
            AffineModel::Wishart(p) => Horizon::Wishart(WishartHorizon::new(p, tau)?),
            AffineModel::JumpOu(p) => Horizon::JumpOu(JumpHorizon::new(p, tau)?),
        })
    }

    pub fn horizon_hp(&self, tau: f64) -> Result<HorizonHp, AffineError> {
        Ok(match self {
            AffineModel::Wishart(p) => HorizonHp::Wishart(WishartHorizon::new_hp(p, tau)?),
            AffineModel::JumpOu(p) => HorizonHp::JumpOu(JumpHorizonHp::new(p, tau)?),
        })
    }

    /// φ_τ(u), ψ_τ(u) for complex symmetric u.
    pub fn coeffs(&self, tau: f64, u: &CSymMat, prev_phase: f64) -> Result<AffineCoeffs, AffineError> {
        Ok(self.horizon(tau)?.coeffs(u, prev_phase))
    }

    /// Real-argument fast path; `Ok(None)` when the transform is infinite.
    pub fn real_coeffs(&self, tau: f64, u: &SymMat) -> Result<Option<RealCoeffs>, AffineError> {
        Ok(self.horizon(tau)?.real(u))
    }

    /// E[exp(-tr[uΣ_t])]; `None` when the transform is infinite.
    pub fn laplace(&self, t: f64, u: &CSymMat) -> Result<Option<Complex64>, AffineError> {
        let c = self.coeffs(t, u, 0.0)?;
        Ok(laplace_from(&c, self.sigma0()))
    }

    pub fn laplace_real(&self, t: f64, u: &SymMat) -> Result<Option<f64>, AffineError> {
        Ok(self
            .real_coeffs(t, u)?
            .map(|c| (-c.phi - c.psi.trace_prod(self.sigma0())).exp()))
    }
}

/// exp(-φ - tr[ψΣ0]) from precomputed coefficients.
pub fn laplace_from(c: &AffineCoeffs, sigma0: &SymMat) -> Option<Complex64> {
    if !c.valid {
        return None;
    }
    let tr = c.psi.trace_prod(&sigma0.to_complex());
    Some((-c.phi - tr).exp())
}

impl Horizon {
    pub fn tau(&self) -> f64 {
        match self {
            Horizon::Wishart(h) => h.tau(),
            Horizon::JumpOu(h) => h.tau(),
        }
    }

    pub fn real(&self, u: &SymMat) -> Option<RealCoeffs> {
        let out = match self {
            Horizon::Wishart(h) => h.eval_real(u.as_mat()),
            Horizon::JumpOu(h) => h.eval_real(u.as_mat()),
        };
        out.map(|(phi, psi)| RealCoeffs {
            phi,
            psi: SymMat::from_symmetric_part(&psi),
        })
    }

    pub fn coeffs(&self, u: &CSymMat, prev_phase: f64) -> AffineCoeffs {
        let tau = self.tau();
        let dim = u.dim();
        match self {
            Horizon::Wishart(h) => match h.eval_complex(u.as_mat(), prev_phase) {
                Some(e) => AffineCoeffs {
                    phi: e.phi,
                    psi: CSymMat::from_symmetric_part(&e.psi),
                    tau,
                    valid: true,
                    phase: e.phase,
                },
                None => AffineCoeffs::invalid(tau, dim, prev_phase),
            },
            Horizon::JumpOu(h) => match h.eval_complex(u.as_mat()) {
                Some((phi, psi)) => AffineCoeffs {
                    phi,
                    psi: CSymMat::from_symmetric_part(&psi),
                    tau,
                    valid: true,
                    phase: prev_phase,
                },
                None => AffineCoeffs::invalid(tau, dim, prev_phase),
            },
        }
    }
}

impl HorizonHp {
    pub fn real(&self, u: &Mat<Quad>) -> Option<(Quad, Mat<Quad>)> {
        match self {
            HorizonHp::Wishart(h) => h.eval_real(u),
            HorizonHp::JumpOu(h) => h.eval_real(u),
        }
    }
}

/// The zero argument gives φ = 0 and ψ = 0 exactly, bypassing rounding in the general path.
pub(crate) fn is_zero<T: crate::matcore::Scalar>(u: &Mat<T>) -> bool {
    u.as_slice().iter().all(|&x| x == T::zero())
}

/// φ and ψ of the Wishart transform at horizon τ.
pub fn wishart_psi_phi(
    params: &WishartParams,
    tau: f64,
    u: &CSymMat,
    prev_phase: f64,
) -> Result<AffineCoeffs, AffineError> {
    Ok(Horizon::Wishart(WishartHorizon::new(params, tau)?).coeffs(u, prev_phase))
}

/// φ and ψ of the jump-OU transform at horizon τ.
pub fn jump_psi_phi(params: &JumpOuParams, tau: f64, u: &CSymMat) -> Result<AffineCoeffs, AffineError> {
    Ok(Horizon::JumpOu(JumpHorizon::new(params, tau)?).coeffs(u, 0.0))
}

/// E[exp(-tr[uΣ_t])] for either process; `None` if the transform is infinite.
pub fn laplace(model: &AffineModel, t: f64, u: &CSymMat) -> Result<Option<Complex64>, AffineError> {
    model.laplace(t, u)
}
