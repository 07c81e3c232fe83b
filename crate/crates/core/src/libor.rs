//! Libor curve layer: exponential-affine martingales M^u_t modelling the bond
//! ratios B(t,T_k)/B(t,T_N), their fit to an initial curve, and the derived
//! forward Libor rates and measure changes.
//!
//! Indexing: tenor dates T_k = k·ΔT for k = 1..=N. The forward rate with index
//! k accrues over [T_k, T_{k+1}], so 1 + ΔT·L_k = M^{u_k}/M^{u_{k+1}}.

use thiserror::Error;

use crate::affine::{AffineError, AffineModel, Horizon, RealCoeffs};
use crate::matcore::{is_spd, min_eigenvalue, SymMat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiborError {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("tenor index {k} outside {lo}..={hi}")]
    InvalidIndex { k: usize, lo: usize, hi: usize },
    #[error("time {t} outside [0, {max}]")]
    InvalidTime { t: f64, max: f64 },
    #[error("state matrix is not positive definite")]
    NotSpd,
    #[error("base direction must be negative definite")]
    NotNegativeDefinite,
    #[error("f(1) = {f1} does not exceed the first bond ratio {ratio}; scale the base direction up")]
    InsufficientMass { f1: f64, ratio: f64 },
    #[error("transform blows up at the base direction (scale {scale})")]
    TransformBlowUp { scale: f64 },
    #[error("fit of tenor {k} stalled with relative residual {residual:e}")]
    NoConvergence { k: usize, residual: f64 },
    #[error("forward coefficient B_{k} is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { k: usize, min_eig: f64 },
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// Tenor structure with constant accrual and the initial bond-price ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct TenorCurve {
    delta_t: f64,
    ratios: Vec<f64>,
    terminal_bond: f64,
}

impl TenorCurve {
    /// `ratios[k-1]` = B(0,T_k)/B(0,T_N) for k = 1..=N; the last entry must be 1.
    pub fn from_ratios(delta_t: f64, ratios: Vec<f64>, terminal_bond: f64) -> Result<Self, LiborError> {
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(LiborError::InvalidCurve(format!("delta_t must be positive, got {delta_t}")));
        }
        if ratios.len() < 2 {
            return Err(LiborError::InvalidCurve("need at least two tenor dates".into()));
        }
        if *ratios.last().unwrap() != 1.0 {
            return Err(LiborError::InvalidCurve("last bond ratio must equal 1".into()));
        }
        for (i, w) in ratios.windows(2).enumerate() {
            if !(w[0].is_finite() && w[0] > w[1]) {
                return Err(LiborError::InvalidCurve(format!(
                    "bond ratios must be strictly decreasing (entries {} and {})",
                    i + 1,
                    i + 2
                )));
            }
        }
        if !(terminal_bond > 0.0 && terminal_bond.is_finite()) {
            return Err(LiborError::InvalidCurve("terminal bond price must be positive".into()));
        }
        Ok(TenorCurve {
            delta_t,
            ratios,
            terminal_bond,
        })
    }

    /// `rates[j]` is the initial forward rate over [T_j, T_{j+1}] for j = 0..N-1, with T_0 = 0.
    pub fn from_libors(delta_t: f64, rates: &[f64]) -> Result<Self, LiborError> {
        if rates.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(LiborError::InvalidCurve("initial Libor rates must be positive".into()));
        }
        let n = rates.len();
        let mut ratios = vec![1.0; n];
        for k in (1..n).rev() {
            ratios[k - 1] = ratios[k] * (1.0 + delta_t * rates[k]);
        }
        let terminal = ratios[0] * (1.0 + delta_t * rates[0]);
        Self::from_ratios(delta_t, ratios, 1.0 / terminal)
    }

    pub fn flat(delta_t: f64, n: usize, rate: f64) -> Result<Self, LiborError> {
        Self::from_libors(delta_t, &vec![rate; n])
    }

    pub fn n_tenors(&self) -> usize {
        self.ratios.len()
    }
    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }
    pub fn terminal_bond(&self) -> f64 {
        self.terminal_bond
    }
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }
    /// T_k = k·ΔT.
    pub fn maturity(&self, k: usize) -> f64 {
        k as f64 * self.delta_t
    }
    pub fn horizon(&self) -> f64 {
        self.maturity(self.n_tenors())
    }
    /// B(0,T_k)/B(0,T_N), k = 1..=N.
    pub fn ratio(&self, k: usize) -> f64 {
        self.ratios[k - 1]
    }
    /// B(0,T_k), with B(0,T_0) = 1.
    pub fn bond(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.terminal_bond * self.ratio(k)
        }
    }
    /// Initial forward Libor over [T_k, T_{k+1}].
    pub fn forward_libor(&self, k: usize) -> f64 {
        (self.bond(k) / self.bond(k + 1) - 1.0) / self.delta_t
    }
    /// Initial forward rates over [T_j, T_{j+1}] for j = 0..N-1.
    pub fn libors(&self) -> Vec<f64> {
        (0..self.n_tenors()).map(|j| self.forward_libor(j)).collect()
    }
}

/// Options for `fit_term_structure`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Starting c for the default direction -c·I.
    pub initial_scale: f64,
    pub max_doublings: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            initial_scale: 0.01,
            max_doublings: 60,
            max_iterations: 200,
            tolerance: 1e-12,
        }
    }
}

/// Fitted matrices u_1 ≺ … ≺ u_N = 0, u_k = ξ_k·ũ.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleFamily {
    base_direction: SymMat,
    xis: Vec<f64>,
    u_mats: Vec<SymMat>,
    horizon: f64,
    scale: Option<f64>,
    residuals: Vec<f64>,
}

impl MartingaleFamily {
    /// Builds a family from given ξ's (length N, last one 0) without fitting.
    pub fn from_xis(base_direction: SymMat, xis: Vec<f64>, horizon: f64) -> Self {
        let u_mats = xis.iter().map(|&x| base_direction.scale(x)).collect();
        let n = xis.len();
        MartingaleFamily {
            base_direction,
            xis,
            u_mats,
            horizon,
            scale: None,
            residuals: vec![0.0; n],
        }
    }

    pub fn base_direction(&self) -> &SymMat {
        &self.base_direction
    }
    pub fn xis(&self) -> &[f64] {
        &self.xis
    }
    /// u_k, k = 1..=N.
    pub fn u(&self, k: usize) -> &SymMat {
        &self.u_mats[k - 1]
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn n_tenors(&self) -> usize {
        self.xis.len()
    }
    /// c when the direction was auto-scaled as -c·I.
    pub fn scale(&self) -> Option<f64> {
        self.scale
    }
    /// Relative fit residuals |f(ξ_k) - ratio_k| / ratio_k.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }
}

/// Fits ξ_1 > … > ξ_{N-1} > 0 so that E[exp(-tr[ξ_k ũ Σ_{T_N}])] = ratio_k.
///
/// With `base_direction = None` the direction is -c·I, c doubled from
/// `opts.initial_scale` until the largest ratio is reachable.
pub fn fit_term_structure(
    model: &AffineModel,
    curve: &TenorCurve,
    base_direction: Option<&SymMat>,
    opts: &FitOptions,
) -> Result<MartingaleFamily, LiborError> {
    let d = model.dim();
    let horizon = model.horizon(curve.horizon())?;
    let sigma0 = model.sigma0();
    let f = |u: &SymMat| -> Option<f64> {
        horizon
            .real(u)
            .map(|c| (-c.phi - c.psi.trace_prod(sigma0)).exp())
    };
    let r1 = curve.ratio(1);

    let (base, scale) = match base_direction {
        Some(b) => {
            if b.dim() != d || !is_spd(&b.scale(-1.0), 0.0) {
                return Err(LiborError::NotNegativeDefinite);
            }
            let f1 = f(b).ok_or(LiborError::TransformBlowUp { scale: 1.0 })?;
            if f1 <= r1 {
                return Err(LiborError::InsufficientMass { f1, ratio: r1 });
            }
            (b.clone(), None)
        }
        None => {
            let mut c = opts.initial_scale;
            let mut found = None;
            for _ in 0..=opts.max_doublings {
                let b = SymMat::identity(d).scale(-c);
                match f(&b) {
                    None => return Err(LiborError::TransformBlowUp { scale: c }),
                    Some(f1) if f1 > r1 => {
                        found = Some(b);
                        break;
                    }
                    Some(_) => c *= 2.0,
                }
            }
            match found {
                Some(b) => (b, Some(c)),
                None => {
                    let b = SymMat::identity(d).scale(-c);
                    return Err(LiborError::InsufficientMass {
                        f1: f(&b).unwrap_or(f64::NAN),
                        ratio: r1,
                    });
                }
            }
        }
    };

    let n = curve.n_tenors();
    let mut xis = vec![0.0; n];
    let mut residuals = vec![0.0; n];
    let mut upper = 1.0;
    for k in 1..n {
        let target = curve.ratio(k);
        let (mut lo, mut hi) = (0.0, upper);
        let mut best = (f64::INFINITY, 0.5 * (lo + hi));
        for _ in 0..opts.max_iterations {
            let mid = 0.5 * (lo + hi);
            let v = f(&base.scale(mid)).ok_or(LiborError::TransformBlowUp { scale: mid })?;
            let res = (v - target).abs() / target;
            if res < best.0 {
                best = (res, mid);
            }
            if v < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        if best.0 > opts.tolerance {
            return Err(LiborError::NoConvergence { k, residual: best.0 });
        }
        xis[k - 1] = best.1;
        residuals[k - 1] = best.0;
        upper = best.1;
    }
    let u_mats = xis.iter().map(|&x| base.scale(x)).collect();
    Ok(MartingaleFamily {
        base_direction: base,
        xis,
        u_mats,
        horizon: curve.horizon(),
        scale,
        residuals,
    })
}

/// Exponential-affine forward price exp(a + tr[bΣ_t]) = B(t,T_k)/B(t,T_{k+1}).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCoeffs {
    pub a: f64,
    pub b: SymMat,
    pub k: usize,
    pub t: f64,
}

/// State process, fitted curve and martingale family bundled together.
#[derive(Debug, Clone)]
pub struct LiborModel {
    model: AffineModel,
    curve: TenorCurve,
    family: MartingaleFamily,
}

impl LiborModel {
    pub fn fit(
        model: AffineModel,
        curve: TenorCurve,
        base_direction: Option<&SymMat>,
        opts: &FitOptions,
    ) -> Result<Self, LiborError> {
        let family = fit_term_structure(&model, &curve, base_direction, opts)?;
        Ok(LiborModel {
            model,
            curve,
            family,
        })
    }

    pub fn from_parts(model: AffineModel, curve: TenorCurve, family: MartingaleFamily) -> Self {
        LiborModel {
            model,
            curve,
            family,
        }
    }

    pub fn model(&self) -> &AffineModel {
        &self.model
    }
    pub fn curve(&self) -> &TenorCurve {
        &self.curve
    }
    pub fn family(&self) -> &MartingaleFamily {
        &self.family
    }
    pub fn n_tenors(&self) -> usize {
        self.curve.n_tenors()
    }
    pub fn delta_t(&self) -> f64 {
        self.curve.delta_t()
    }
    pub fn maturity(&self, k: usize) -> f64 {
        self.curve.maturity(k)
    }

    fn check_k(&self, k: usize, lo: usize, hi: usize) -> Result<(), LiborError> {
        if k < lo || k > hi {
            return Err(LiborError::InvalidIndex { k, lo, hi });
        }
        Ok(())
    }

    fn check_t(&self, t: f64, max: f64) -> Result<(), LiborError> {
        if !(0.0..=max).contains(&t) {
            return Err(LiborError::InvalidTime { t, max });
        }
        Ok(())
    }

    /// (φ, ψ) of u_k at horizon T_N - t for every k = 1..=N.
    pub fn coeffs_at(&self, t: f64) -> Result<Vec<RealCoeffs>, LiborError> {
        self.check_t(t, self.curve.horizon())?;
        let h = self.model.horizon(self.curve.horizon() - t)?;
        self.coeffs_with(&h)
    }

    fn coeffs_with(&self, h: &Horizon) -> Result<Vec<RealCoeffs>, LiborError> {
        (1..=self.n_tenors())
            .map(|k| {
                h.real(self.family.u(k))
                    .ok_or(LiborError::TransformBlowUp { scale: self.family.xis[k - 1] })
            })
            .collect()
    }

    /// M^{u_k}_t = exp(-φ_{T_N-t}(u_k) - tr[ψ_{T_N-t}(u_k)Σ_t]).
    pub fn martingale_value(&self, t: f64, k: usize, sigma_t: &SymMat) -> Result<f64, LiborError> {
        self.check_k(k, 1, self.n_tenors())?;
        self.check_t(t, self.curve.horizon())?;
        if !is_spd(sigma_t, 0.0) {
            return Err(LiborError::NotSpd);
        }
        if k == self.n_tenors() {
            return Ok(1.0);
        }
        let c = self
            .model
            .real_coeffs(self.curve.horizon() - t, self.family.u(k))?
            .ok_or(LiborError::TransformBlowUp { scale: self.family.xis[k - 1] })?;
        Ok((-c.phi - c.psi.trace_prod(sigma_t)).exp())
    }

    /// A and B of the forward price B(t,T_k)/B(t,T_{k+1}), 1 ≤ k ≤ N-1.
    ///
    /// The price is meaningful for t ≤ T_k; the coefficients themselves are
    /// defined up to T_N, where they reduce to (0, u_{k+1} - u_k).
    pub fn forward_coeffs(&self, k: usize, t: f64) -> Result<ForwardCoeffs, LiborError> {
        self.check_k(k, 1, self.n_tenors() - 1)?;
        self.check_t(t, self.curve.horizon())?;
        let tau = self.curve.horizon() - t;
        let h = self.model.horizon(tau)?;
        let blow = |k: usize| LiborError::TransformBlowUp { scale: self.family.xis[k - 1] };
        let ck = h.real(self.family.u(k)).ok_or_else(|| blow(k))?;
        let ck1 = h.real(self.family.u(k + 1)).ok_or_else(|| blow(k + 1))?;
        forward_from(k, t, &ck, &ck1)
    }

    /// Forward Libor over [T_k, T_{k+1}] at time t in state Σ_t.
    pub fn libor_rate(&self, k: usize, t: f64, sigma_t: &SymMat) -> Result<f64, LiborError> {
        let fc = self.forward_coeffs(k, t)?;
        Ok(((fc.a + fc.b.trace_prod(sigma_t)).exp_m1()) / self.delta_t())
    }

    /// dP_{T_k}/dP_{T_N} restricted to F_t: M^{u_k}_t / M^{u_k}_0.
    pub fn radon_nikodym(&self, k: usize, t: f64, sigma_t: &SymMat) -> Result<f64, LiborError> {
        self.check_k(k, 1, self.n_tenors())?;
        if k == self.n_tenors() {
            return Ok(1.0);
        }
        let now = self.martingale_value(t, k, sigma_t)?;
        let start = self.martingale_value(0.0, k, self.model.sigma0())?;
        Ok(now / start)
    }
}

pub(crate) fn forward_from(
    k: usize,
    t: f64,
    ck: &RealCoeffs,
    ck1: &RealCoeffs,
) -> Result<ForwardCoeffs, LiborError> {
    let b = ck1.psi.sub(&ck.psi);
    let min_eig = if b.frobenius() == 0.0 { 0.0 } else { min_eigenvalue(&b) };
    if min_eig < -1e-12 {
        return Err(LiborError::NotPsd { k, min_eig });
    }
    Ok(ForwardCoeffs {
        a: ck1.phi - ck.phi,
        b,
        k,
        t,
    })
}
