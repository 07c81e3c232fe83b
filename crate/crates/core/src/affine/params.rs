use crate::matcore::{is_spd, min_eigenvalue, real_eigenvalues, Mat, SquareMat, SymMat};

use super::AffineError;

/// Wishart diffusion dΣ = (κQᵀQ + MΣ + ΣMᵀ)dt + √Σ dW Q + Qᵀ dWᵀ √Σ.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartParams {
    sigma0: SymMat,
    m: SquareMat,
    q: SquareMat,
    kappa: f64,
}

impl WishartParams {
    pub fn new(sigma0: SymMat, m: SquareMat, q: SquareMat, kappa: f64) -> Result<Self, AffineError> {
        let d = sigma0.dim();
        if m.dim() != d || q.dim() != d {
            return Err(AffineError::Dimension);
        }
        check_state(&sigma0)?;
        check_stable(&m)?;
        let det_q = q.det();
        if !det_q.is_finite() || det_q.abs() < 1e-300 {
            return Err(AffineError::SingularQ);
        }
        if !(kappa >= (d + 1) as f64) {
            return Err(AffineError::Gindikin { kappa, dim: d });
        }
        Ok(WishartParams { sigma0, m, q, kappa })
    }

    /// κ = 3, Σ0 = diag(3.75, 3.45), M = diag(-0.3125e-3, -0.5e-3), Q = diag(0.034, 0.042).
    pub fn benchmark() -> Self {
        WishartParams::new(
            SymMat::from_diag(&[3.75, 3.45]),
            Mat::from_diag(&[-0.3125e-3, -0.5e-3]),
            Mat::from_diag(&[0.034, 0.042]),
            3.0,
        )
        .expect("benchmark parameters are valid")
    }

    pub fn dim(&self) -> usize {
        self.sigma0.dim()
    }
    pub fn sigma0(&self) -> &SymMat {
        &self.sigma0
    }
    pub fn m(&self) -> &SquareMat {
        &self.m
    }
    pub fn q(&self) -> &SquareMat {
        &self.q
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// QᵀQ.
    pub fn qtq(&self) -> SymMat {
        SymMat::from_symmetric_part(&(self.q.transpose() * &self.q))
    }

    pub fn with_sigma0(&self, sigma0: SymMat) -> Result<Self, AffineError> {
        Self::new(sigma0, self.m.clone(), self.q.clone(), self.kappa)
    }
    pub fn with_m(&self, m: SquareMat) -> Result<Self, AffineError> {
        Self::new(self.sigma0.clone(), m, self.q.clone(), self.kappa)
    }
    pub fn with_q(&self, q: SquareMat) -> Result<Self, AffineError> {
        Self::new(self.sigma0.clone(), self.m.clone(), q, self.kappa)
    }
    pub fn with_kappa(&self, kappa: f64) -> Result<Self, AffineError> {
        Self::new(self.sigma0.clone(), self.m.clone(), self.q.clone(), kappa)
    }

    /// Long-run mean Σ∞ solving MΣ∞ + Σ∞Mᵀ + κQᵀQ = 0.
    pub fn long_run_mean(&self) -> Result<SymMat, AffineError> {
        Ok(crate::matcore::solve_lyapunov(&self.m, &self.qtq().scale(self.kappa))?)
    }
}

/// Two-factor Q with off-diagonal Q12 = Q21 = ρ√(Q11 Q22).
pub fn correlated_q(q11: f64, q22: f64, rho: f64) -> Result<SquareMat, AffineError> {
    if !(rho.abs() < 1.0) {
        return Err(AffineError::Correlation(rho));
    }
    if q11 <= 0.0 || q22 <= 0.0 {
        return Err(AffineError::SingularQ);
    }
    let off = rho * (q11 * q22).sqrt();
    Ok(Mat::from_row_major(2, vec![q11, off, off, q22])?)
}

/// Jump-size distribution on SPD matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    /// Wishart with `n` degrees of freedom and scale `q`.
    Wishart { n: f64, q: SymMat },
    /// Non-central Wishart; the non-centrality enters through `mm · mmᵀ`.
    NonCentralWishart { n: f64, q: SymMat, mm: SquareMat },
}

impl JumpLaw {
    pub fn n(&self) -> f64 {
        match self {
            JumpLaw::Wishart { n, .. } | JumpLaw::NonCentralWishart { n, .. } => *n,
        }
    }
    pub fn scale(&self) -> &SymMat {
        match self {
            JumpLaw::Wishart { q, .. } | JumpLaw::NonCentralWishart { q, .. } => q,
        }
    }
    /// 𝓜𝓜ᵀ, absent for the central law.
    pub fn noncentrality(&self) -> Option<SymMat> {
        match self {
            JumpLaw::Wishart { .. } => None,
            JumpLaw::NonCentralWishart { mm, .. } => {
                Some(SymMat::from_symmetric_part(&(mm * mm.transpose())))
            }
        }
    }
}

/// Pure-jump Ornstein–Uhlenbeck process dΣ = (MΣ + ΣMᵀ)dt + dL with compound-Poisson L.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOuParams {
    sigma0: SymMat,
    m: SquareMat,
    lambda: f64,
    law: JumpLaw,
}

impl JumpOuParams {
    pub fn new(sigma0: SymMat, m: SquareMat, lambda: f64, law: JumpLaw) -> Result<Self, AffineError> {
        let d = sigma0.dim();
        if m.dim() != d || law.scale().dim() != d {
            return Err(AffineError::Dimension);
        }
        check_state(&sigma0)?;
        check_stable(&m)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(AffineError::Intensity(lambda));
        }
        if !is_spd(law.scale(), 0.0) {
            return Err(AffineError::JumpLaw("jump scale matrix must be SPD".into()));
        }
        if !(law.n() > d as f64 - 1.0) {
            return Err(AffineError::JumpLaw(format!(
                "degrees of freedom {} must exceed d - 1 = {}",
                law.n(),
                d - 1
            )));
        }
        if let JumpLaw::NonCentralWishart { mm, .. } = &law {
            if mm.dim() != d || !mm.is_finite() {
                return Err(AffineError::Dimension);
            }
        }
        Ok(JumpOuParams {
            sigma0,
            m,
            lambda,
            law,
        })
    }

    /// M = diag(-0.055, -0.176), λ = 0.1, Wishart jumps with n = 3.1 and scale diag(0.27, 0.05),
    /// Σ0 = [[1.875, 0.6], [0.6, 1.275]].
    pub fn reference() -> Self {
        JumpOuParams::new(
            SymMat::from_row_major(2, vec![1.875, 0.6, 0.6, 1.275]).unwrap(),
            Mat::from_diag(&[-0.055, -0.176]),
            0.1,
            JumpLaw::Wishart {
                n: 3.1,
                q: SymMat::from_diag(&[0.27, 0.05]),
            },
        )
        .expect("reference jump parameters are valid")
    }

    pub fn dim(&self) -> usize {
        self.sigma0.dim()
    }
    pub fn sigma0(&self) -> &SymMat {
        &self.sigma0
    }
    pub fn m(&self) -> &SquareMat {
        &self.m
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn law(&self) -> &JumpLaw {
        &self.law
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self, AffineError> {
        Self::new(self.sigma0.clone(), self.m.clone(), lambda, self.law.clone())
    }
}

fn check_state(sigma0: &SymMat) -> Result<(), AffineError> {
    if !is_spd(sigma0, 0.0) {
        return Err(AffineError::NotSpd(min_eigenvalue(sigma0)));
    }
    Ok(())
}

fn check_stable(m: &SquareMat) -> Result<(), AffineError> {
    let worst = real_eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst >= 0.0 {
        return Err(AffineError::Unstable(worst));
    }
    Ok(())
}
