use num_complex::Complex64;
use qd::Quad;

use crate::matcore::{expm, expm_taylor, logdet_tracked, Mat, RealScalar, Scalar, SquareMat, SymMat};

use super::{is_zero, AffineError, WishartParams};

/// Blocks of exp(τ·[[M, 2QᵀQ], [0, -Mᵀ]]) for a fixed horizon τ.
///
/// With F = u·E12 + E22 and G = u·E11 + E21 the transform is
/// ψ = F⁻¹G and φ = (κ/2)(log det F + τ tr M).
#[derive(Debug, Clone)]
pub struct WishartHorizon<R> {
    tau: f64,
    e11: Mat<R>,
    e12: Mat<R>,
    e21: Mat<R>,
    e22: Mat<R>,
    half_kappa: R,
    trace_m_tau: R,
}

fn generator(params: &WishartParams, tau: f64) -> SquareMat {
    let d = params.dim();
    let m = params.m();
    let top_right = params.qtq().scale(2.0);
    Mat::from_blocks(m, top_right.as_mat(), &Mat::zeros(d), &(-m.transpose())).scale(tau)
}

impl WishartHorizon<f64> {
    pub fn new(params: &WishartParams, tau: f64) -> Result<Self, AffineError> {
        if tau < 0.0 {
            return Err(AffineError::NegativeTau(tau));
        }
        let e = expm(&generator(params, tau))?;
        Ok(Self::from_exp(params, tau, &e))
    }
}

impl WishartHorizon<Quad> {
    /// Double-double variant; the block exponential comes from a Taylor series.
    pub fn new_hp(params: &WishartParams, tau: f64) -> Result<Self, AffineError> {
        if tau < 0.0 {
            return Err(AffineError::NegativeTau(tau));
        }
        let d = params.dim();
        let to_q = |a: &SquareMat| a.map(Quad::from_f64);
        let m = to_q(params.m());
        let q = to_q(params.q());
        let two_qtq = (q.transpose() * &q).scale(Quad::from_f64(2.0));
        let gen = Mat::from_blocks(&m, &two_qtq, &Mat::zeros(d), &(-m.transpose()))
            .scale(Quad::from_f64(tau));
        let e = expm_taylor(&gen);
        Ok(Self::from_exp(params, tau, &e))
    }
}

impl<R: RealScalar> WishartHorizon<R> {
    fn from_exp(params: &WishartParams, tau: f64, e: &Mat<R>) -> Self {
        let d = params.dim();
        // Summed in R so that log det E22 = -τ tr M holds to working precision.
        let tr_m = (0..d).fold(R::zero(), |acc, i| acc + R::from_f64(params.m()[(i, i)]));
        WishartHorizon {
            tau,
            e11: e.block(0, 0, d),
            e12: e.block(0, d, d),
            e21: e.block(d, 0, d),
            e22: e.block(d, d, d),
            half_kappa: R::from_f64(0.5 * params.kappa()),
            trace_m_tau: tr_m * R::from_f64(tau),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn fg<T: Scalar + From<R>>(&self, u: &Mat<T>) -> (Mat<T>, Mat<T>) {
        let f = u * self.e12.cast::<T>() + self.e22.cast::<T>();
        let g = u * self.e11.cast::<T>() + self.e21.cast::<T>();
        (f, g)
    }

    /// (φ, ψ) for real symmetric u; `None` when the transform has blown up.
    pub fn eval_real(&self, u: &Mat<R>) -> Option<(R, Mat<R>)> {
        if is_zero(u) {
            return Some((R::zero(), u.clone()));
        }
        let (f, g) = self.fg(u);
        let f64_f = f.map(|x| x.to_f64());
        let eig = crate::matcore::real_eigenvalues(&f64_f).ok()?;
        if eig.iter().any(|z| z.re <= 0.0) {
            return None;
        }
        let lu = f.lu();
        let det = lu.det();
        if !(det > R::zero()) || det.to_f64() < 1e-300 {
            return None;
        }
        let psi = lu.solve(&g).ok()?.symmetrized();
        let phi = self.half_kappa * (det.ln() + self.trace_m_tau);
        if !psi.is_finite() || !phi.is_finite() {
            return None;
        }
        Some((phi, psi))
    }
}

/// Outcome of a complex-argument evaluation.
#[derive(Debug, Clone)]
pub struct ComplexEval {
    pub phi: Complex64,
    pub psi: Mat<Complex64>,
    pub phase: f64,
}

impl WishartHorizon<f64> {
    /// (φ, ψ) for complex symmetric u with the log-det branch tracked from `prev_phase`.
    pub fn eval_complex(&self, u: &Mat<Complex64>, prev_phase: f64) -> Option<ComplexEval> {
        if is_zero(u) {
            return Some(ComplexEval {
                phi: Complex64::new(0.0, 0.0),
                psi: u.clone(),
                phase: prev_phase,
            });
        }
        // |E[exp(-tr uΣ)]| is bounded by the real transform at Re(u), and that
        // one is finite exactly where the closed form is.
        self.eval_real(&u.re())?;
        let (f, g) = self.fg(u);
        let (logdet, phase) = logdet_tracked(&f, prev_phase).ok()?;
        let psi = f.solve(&g).ok()?.symmetrized();
        let phi = (logdet + Complex64::new(self.trace_m_tau, 0.0)) * self.half_kappa;
        if !psi.is_finite() || !phi.is_finite() {
            return None;
        }
        Some(ComplexEval { phi, psi, phase })
    }

    pub fn eval_sym(&self, u: &SymMat) -> Option<(f64, SymMat)> {
        self.eval_real(u.as_mat())
            .map(|(phi, psi)| (phi, SymMat::from_symmetric_part(&psi)))
    }
}

/// Classical RK4 on the Riccati system, used as an internal cross-check of the closed form.
pub(crate) fn riccati_rk4(params: &WishartParams, tau: f64, u: &SymMat, steps: usize) -> (f64, SymMat) {
    let m = params.m();
    let mt = m.transpose();
    let qtq = params.qtq();
    let qtq = qtq.as_mat();
    let kappa = params.kappa();
    let rhs = |psi: &SquareMat| -> (f64, SquareMat) {
        let dpsi = psi * m + &mt * psi - (psi * qtq * psi).scale(2.0);
        (kappa * qtq.trace_prod(psi), dpsi)
    };
    let h = tau / steps as f64;
    let mut psi = u.as_mat().clone();
    let mut phi = 0.0;
    for _ in 0..steps {
        let (p1, k1) = rhs(&psi);
        let (p2, k2) = rhs(&(&psi + k1.scale(0.5 * h)));
        let (p3, k3) = rhs(&(&psi + k2.scale(0.5 * h)));
        let (p4, k4) = rhs(&(&psi + k3.scale(h)));
        psi = &psi + (&k1 + k2.scale(2.0) + k3.scale(2.0) + &k4).scale(h / 6.0);
        phi += h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
    }
    (phi, SymMat::from_symmetric_part(&psi))
}
