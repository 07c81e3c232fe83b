use num_complex::Complex64;
use qd::Quad;

use crate::matcore::{
    complex_eigenvalues, expm, expm_taylor, sqrtm_spd, sym_eigen, Mat, RealScalar, SquareMat,
    SymMat,
};

use super::quadrature::{adaptive_gl, gl20};
use super::{is_zero, AffineError, JumpOuParams};

/// Absolute tolerance and node budget for the φ quadrature.
pub const PHI_TOL: f64 = 1e-10;
pub const PHI_MAX_NODES: usize = 1 << 14;

/// Jump law data in the working precision.
#[derive(Debug, Clone)]
struct Law<R> {
    q: Mat<R>,
    mmt: Option<Mat<R>>,
    half_n: R,
}

/// Evaluator of the pure-jump OU transform at a fixed horizon.
#[derive(Debug, Clone)]
pub struct JumpHorizon {
    params: JumpOuParams,
    tau: f64,
    e_tau: SquareMat,
    law: Law<f64>,
    q_sqrt: SymMat,
}

impl JumpHorizon {
    pub fn new(params: &JumpOuParams, tau: f64) -> Result<Self, AffineError> {
        if tau < 0.0 {
            return Err(AffineError::NegativeTau(tau));
        }
        let e_tau = expm(&params.m().scale(tau))?;
        let law = params.law();
        Ok(JumpHorizon {
            params: params.clone(),
            tau,
            e_tau,
            law: Law {
                q: law.scale().as_mat().clone(),
                mmt: law.noncentrality().map(|s| s.into_mat()),
                half_n: 0.5 * law.n(),
            },
            q_sqrt: sqrtm_spd(law.scale())?,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// True if I + 2𝒬^{1/2} Re(ψ) 𝒬^{1/2} is positive definite, i.e. the jump
    /// transform is finite.
    fn admissible(&self, re_psi: &SquareMat) -> bool {
        let a = SymMat::from_symmetric_part(
            &(Mat::identity(re_psi.dim())
                + (self.q_sqrt.as_mat() * re_psi * self.q_sqrt.as_mat()).scale(2.0)),
        );
        sym_eigen(&a).0[0] > 1e-14
    }

    pub fn eval_real(&self, u: &SquareMat) -> Option<(f64, SquareMat)> {
        if is_zero(u) {
            return Some((0.0, u.clone()));
        }
        let m = self.params.m();
        let lambda = self.params.lambda();
        let integral = adaptive_gl(
            |s| {
                let e = expm(&m.scale(s)).ok()?;
                let psi = e.transpose() * u * &e;
                if !self.admissible(&psi) {
                    return None;
                }
                jump_mgf_real(&self.law, &psi)
            },
            0.0,
            self.tau,
            PHI_TOL / lambda.max(1e-300),
            PHI_MAX_NODES,
        )?;
        let psi = (self.e_tau.transpose() * u * &self.e_tau).symmetrized();
        Some((lambda * self.tau - lambda * integral.value, psi))
    }

    pub fn eval_complex(&self, u: &Mat<Complex64>) -> Option<(Complex64, Mat<Complex64>)> {
        if is_zero(u) {
            return Some((Complex64::new(0.0, 0.0), u.clone()));
        }
        let m = self.params.m();
        let lambda = self.params.lambda();
        let q = self.law.q.to_complex();
        let mmt = self.law.mmt.as_ref().map(|x| x.to_complex());
        let d = u.dim();
        let integral = adaptive_gl(
            |s| {
                let e = expm(&m.scale(s)).ok()?.to_complex();
                let psi = e.transpose() * u * &e;
                if !self.admissible(&psi.re()) {
                    return None;
                }
                let a = Mat::identity(d) + (&psi * &q).scale(Complex64::new(2.0, 0.0));
                // Eigenvalues of I + 2ψ𝒬 have positive real part on the admissible set,
                // so the principal logs give the continuous branch.
                let logdet: Complex64 = complex_eigenvalues(&a).ok()?.iter().map(|z| z.ln()).sum();
                let mut expo = -logdet * self.law.half_n;
                if let Some(mmt) = &mmt {
                    let x = a.solve(&psi).ok()?;
                    expo -= x.trace_prod(mmt);
                }
                Some(expo.exp())
            },
            0.0,
            self.tau,
            PHI_TOL / lambda.max(1e-300),
            PHI_MAX_NODES,
        )?;
        let e = self.e_tau.to_complex();
        let psi = (e.transpose() * u * &e).symmetrized();
        let phi = Complex64::new(lambda * self.tau, 0.0) - integral.value * lambda;
        Some((phi, psi))
    }
}

/// E[exp(-tr[ψJ])] for the jump law, real ψ.
fn jump_mgf_real<R: RealScalar>(law: &Law<R>, psi: &Mat<R>) -> Option<R> {
    let d = psi.dim();
    let a = Mat::identity(d) + (psi * &law.q).scale(R::from_f64(2.0));
    let lu = a.lu();
    let det = lu.det();
    if !(det > R::zero()) {
        return None;
    }
    let mut expo = -(det.ln() * law.half_n);
    if let Some(mmt) = &law.mmt {
        let x = lu.solve(psi).ok()?;
        expo -= x.trace_prod(mmt);
    }
    Some(expo.exp())
}

/// Double-double evaluator with a fixed composite Gauss–Legendre rule.
///
/// A fixed rule keeps φ a smooth function of u, which matters when many
/// nearby transforms are combined into high-order cumulants.
#[derive(Debug, Clone)]
pub struct JumpHorizonHp {
    lambda: Quad,
    tau: Quad,
    e_tau: Mat<Quad>,
    law: Law<Quad>,
    nodes: Vec<(Quad, Mat<Quad>)>,
}

const HP_PANELS: usize = 16;

impl JumpHorizonHp {
    pub fn new(params: &JumpOuParams, tau: f64) -> Result<Self, AffineError> {
        if tau < 0.0 {
            return Err(AffineError::NegativeTau(tau));
        }
        let to_q = |a: &SquareMat| a.map(Quad::from_f64);
        let m = to_q(params.m());
        let law = params.law();
        let rule = gl20();
        let mut nodes = Vec::with_capacity(HP_PANELS * rule.nodes.len());
        let h = tau / HP_PANELS as f64;
        for p in 0..HP_PANELS {
            for (s, w) in rule.mapped(p as f64 * h, (p + 1) as f64 * h) {
                let e = expm_taylor(&m.scale(Quad::from_f64(s)));
                nodes.push((Quad::from_f64(w), e));
            }
        }
        Ok(JumpHorizonHp {
            lambda: Quad::from_f64(params.lambda()),
            tau: Quad::from_f64(tau),
            e_tau: expm_taylor(&m.scale(Quad::from_f64(tau))),
            law: Law {
                q: to_q(law.scale().as_mat()),
                mmt: law.noncentrality().map(|s| to_q(s.as_mat())),
                half_n: Quad::from_f64(0.5 * law.n()),
            },
            nodes,
        })
    }

    pub fn eval_real(&self, u: &Mat<Quad>) -> Option<(Quad, Mat<Quad>)> {
        if is_zero(u) {
            return Some((Quad::ZERO, u.clone()));
        }
        let mut integral = Quad::ZERO;
        for (w, e) in &self.nodes {
            let psi = e.transpose() * u * e;
            integral += *w * jump_mgf_real(&self.law, &psi)?;
        }
        let psi = (self.e_tau.transpose() * u * &self.e_tau).symmetrized();
        let phi = self.lambda * self.tau - self.lambda * integral;
        if !phi.is_finite() {
            return None;
        }
        Some((phi, psi))
    }
}
