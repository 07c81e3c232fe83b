//! European swaptions as options on a coupon bond with unit strike.
//!
//! Moments of CB(T_i) = Σ c_k B(T_i,T_k) under each forward measure are exact
//! transforms; they are accumulated in double-double because the high-order
//! cumulants are many orders of magnitude below the raw moments. Tail
//! probabilities P_k[CB > 1] come from an Edgeworth expansion.

use qd::Quad;
use rayon::prelude::*;

use crate::affine::HorizonHp;
use crate::caps::{Diagnostic, Priced, PricingError};
use crate::libor::{LiborError, LiborModel};
use crate::matcore::{Mat, RealScalar};

pub const MAX_ORDER: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Call on the coupon bond.
    Receiver,
    /// Put on the coupon bond.
    Payer,
}

/// Option expiring at T_i on the swap paying over (T_i, T_m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwaptionSpec {
    pub i: usize,
    pub m: usize,
    pub strike: f64,
    pub side: Side,
}

impl SwaptionSpec {
    pub fn new(i: usize, m: usize, strike: f64, side: Side) -> Self {
        SwaptionSpec { i, m, strike, side }
    }

    /// (k, c_k) for k = i+1..=m.
    pub fn coupons(&self, delta_t: f64) -> Vec<(usize, f64)> {
        (self.i + 1..=self.m)
            .map(|k| {
                let c = delta_t * self.strike;
                (k, if k == self.m { 1.0 + c } else { c })
            })
            .collect()
    }

    pub fn validate(&self, lm: &LiborModel) -> Result<(), PricingError> {
        let n = lm.n_tenors();
        if self.i < 1 || self.i >= self.m || self.m > n {
            return Err(PricingError::InvalidSpec(format!(
                "need 1 <= i < m <= {n}, got i = {}, m = {}",
                self.i, self.m
            )));
        }
        if !self.strike.is_finite() {
            return Err(PricingError::InvalidSpec("strike must be finite".into()));
        }
        Ok(())
    }

    /// Forward value of the underlying swap from the receiver's side,
    /// Σ c_k B(0,T_k) - B(0,T_i).
    pub fn swap_value(&self, lm: &LiborModel) -> f64 {
        let curve = lm.curve();
        self.coupons(lm.delta_t())
            .iter()
            .map(|&(k, c)| c * curve.bond(k))
            .sum::<f64>()
            - curve.bond(self.i)
    }
}

/// Cumulants κ_1..κ_order of CB(T_i) under the T_k-forward measure.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSet {
    pub order: usize,
    pub cumulants: Vec<f64>,
    pub measure: usize,
}

impl CumulantSet {
    pub fn mean(&self) -> f64 {
        self.cumulants[0]
    }
    pub fn variance(&self) -> f64 {
        self.cumulants[1]
    }
    /// λ_j = κ_j / κ_2^{j/2} for j = 3..=order.
    pub fn standardized(&self) -> Vec<f64> {
        let sd = self.variance().sqrt();
        (3..=self.order)
            .map(|j| self.cumulants[j - 1] / sd.powi(j as i32))
            .collect()
    }
}

/// Raw moments m_1..m_n to cumulants by κ_n = m_n - Σ_{j<n} C(n-1, j-1) κ_j m_{n-j}.
pub fn cumulants_from_moments<R: RealScalar>(moments: &[R]) -> Vec<R> {
    let n = moments.len();
    let mut binom = vec![vec![0.0f64; n + 1]; n + 1];
    for a in 0..=n {
        binom[a][0] = 1.0;
        for b in 1..=a {
            binom[a][b] = binom[a - 1][b - 1] + if b < a { binom[a - 1][b] } else { 0.0 };
        }
    }
    let mut kappa: Vec<R> = Vec::with_capacity(n);
    for order in 1..=n {
        let mut k = moments[order - 1];
        for j in 1..order {
            k -= R::from_f64(binom[order - 1][j - 1]) * kappa[j - 1] * moments[order - j - 1];
        }
        kappa.push(k);
    }
    kappa
}

pub fn moments_to_cumulants(moments: &[f64], measure: usize) -> Result<CumulantSet, PricingError> {
    if moments.len() < 2 {
        return Err(PricingError::InvalidSpec("need at least two moments".into()));
    }
    let cumulants = cumulants_from_moments(moments);
    if !(cumulants[1] > 0.0) {
        return Err(PricingError::DegenerateDistribution(cumulants[1]));
    }
    Ok(CumulantSet {
        order: moments.len(),
        cumulants,
        measure,
    })
}

/// Coefficients c_n of the density φ(z)·Σ c_n He_n(z) of the standardized
/// variable, from exp(Σ_j ε^{j-2} λ_j x^j / j!) truncated at ε^{order-2}.
pub fn edgeworth_coefficients(lambdas: &[f64]) -> Vec<f64> {
    let order = lambdas.len() + 2;
    let max_eps = order - 2;
    let max_x = 3 * max_eps;
    let zero = || vec![vec![0.0; max_x + 1]; max_eps + 1];
    let mut s = zero();
    let mut fact = 2.0;
    for (idx, &lam) in lambdas.iter().enumerate() {
        let j = idx + 3;
        fact *= j as f64;
        s[j - 2][j] = lam / fact;
    }
    let mut result = zero();
    result[0][0] = 1.0;
    let mut term = result.clone();
    for r in 1..=max_eps {
        let mut next = zero();
        for (e1, row) in term.iter().enumerate() {
            for (x1, &t) in row.iter().enumerate() {
                if t == 0.0 {
                    continue;
                }
                for (e2, srow) in s.iter().enumerate().skip(1) {
                    if e1 + e2 > max_eps {
                        break;
                    }
                    for (x2, &sv) in srow.iter().enumerate() {
                        if sv != 0.0 && x1 + x2 <= max_x {
                            next[e1 + e2][x1 + x2] += t * sv / r as f64;
                        }
                    }
                }
            }
        }
        for (rrow, nrow) in result.iter_mut().zip(&next) {
            for (a, b) in rrow.iter_mut().zip(nrow) {
                *a += b;
            }
        }
        term = next;
    }
    (0..=max_x)
        .map(|n| result.iter().map(|row| row[n]).sum())
        .collect()
}

/// Probabilists' Hermite polynomials He_0..He_n at z.
fn hermite(z: f64, n: usize) -> Vec<f64> {
    let mut h = vec![1.0, z];
    for k in 1..n {
        let next = z * h[k] - k as f64 * h[k - 1];
        h.push(next);
    }
    h.truncate(n + 1);
    h
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P[N(0,1) > z].
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Edgeworth tail probability with clamping information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailProbability {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

/// P[X > threshold] from the cumulants of X.
pub fn edgeworth_tail(cs: &CumulantSet, threshold: f64) -> Result<TailProbability, PricingError> {
    if cs.order < 2 || cs.cumulants.len() < cs.order {
        return Err(PricingError::InvalidSpec("cumulant set too short".into()));
    }
    if !(cs.variance() > 0.0) {
        return Err(PricingError::DegenerateDistribution(cs.variance()));
    }
    let z = (threshold - cs.mean()) / cs.variance().sqrt();
    if z.is_infinite() {
        let v = if z > 0.0 { 0.0 } else { 1.0 };
        return Ok(TailProbability {
            value: v,
            raw: v,
            clamped: false,
        });
    }
    let coeffs = edgeworth_coefficients(&cs.standardized());
    let he = hermite(z, coeffs.len().max(2));
    let correction: f64 = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, c)| c * he[n - 1])
        .sum();
    let raw = normal_sf(z) + normal_pdf(z) * correction;
    let value = raw.clamp(0.0, 1.0);
    Ok(TailProbability {
        value,
        raw,
        clamped: value != raw,
    })
}

/// Exact moment machinery for one swaption.
pub struct MomentEngine {
    i: usize,
    coupons: Vec<Quad>,
    /// φ and ψ at horizon T_N - T_i for u_i..=u_m.
    phi_tau: Vec<Quad>,
    psi_tau: Vec<Mat<Quad>>,
    /// log(M^{u_k}_{T_i}/M^{u_k}_0) + tr[ψ_τ(u_k)Σ_{T_i}] for k = i..=m.
    log_pref: Vec<Quad>,
    at_expiry: HorizonHp,
    sigma0: Mat<Quad>,
}

impl MomentEngine {
    pub fn new(lm: &LiborModel, spec: &SwaptionSpec) -> Result<Self, PricingError> {
        spec.validate(lm)?;
        let model = lm.model();
        let t_n = lm.curve().horizon();
        let t_i = lm.maturity(spec.i);
        let rest = model.horizon_hp(t_n - t_i)?;
        let fam = lm.family();
        let full = model.horizon_hp(t_n)?;
        let sigma0 = model.sigma0().as_mat().map(Quad::from_f64);
        let mut phi_tau = Vec::new();
        let mut psi_tau = Vec::new();
        let mut log_pref = Vec::new();
        for k in spec.i..=spec.m {
            let blow = LiborError::TransformBlowUp { scale: fam.xis()[k - 1] };
            let u = fam.u(k).as_mat().map(Quad::from_f64);
            let (phi, psi) = rest.real(&u).ok_or(blow.clone())?;
            let (phi_n, psi_n) = full.real(&u).ok_or(blow)?;
            log_pref.push(phi_n + psi_n.trace_prod(&sigma0) - phi);
            phi_tau.push(phi);
            psi_tau.push(psi);
        }
        Ok(MomentEngine {
            i: spec.i,
            coupons: spec
                .coupons(lm.delta_t())
                .iter()
                .map(|&(_, c)| Quad::from_f64(c))
                .collect(),
            phi_tau,
            psi_tau,
            log_pref,
            at_expiry: model.horizon_hp(t_i)?,
            sigma0,
        })
    }

    fn m(&self) -> usize {
        self.i + self.coupons.len()
    }

    /// E^{P_{T_k}}[CB(T_i)^q] for q = 1..=max_q.
    pub fn moments(&self, measure: usize, max_q: usize) -> Result<Vec<Quad>, PricingError> {
        if measure < self.i || measure > self.m() {
            return Err(PricingError::InvalidSpec(format!(
                "measure index {measure} outside {}..={}",
                self.i,
                self.m()
            )));
        }
        let d = self.sigma0.dim();
        let idx = measure - self.i;
        let log_pref = self.log_pref[idx];
        // The q = 0 term is 1 up to rounding in the horizon split T_i + (T_N - T_i);
        // dividing by it keeps the moment sequence that of a probability measure.
        let mut out = Vec::with_capacity(max_q + 1);
        for q in 0..=max_q {
            let qq = Quad::from_f64(q as f64);
            let mut total = Quad::ZERO;
            let mut failed = false;
            let base = &self.psi_tau[idx] - &self.psi_tau[0].scale(qq);
            let shift = log_pref + qq * self.phi_tau[0];
            self.visit(0, q, Quad::ONE, Quad::ZERO, Mat::zeros(d), &mut |coef, sum_phi, sum_psi| {
                if failed {
                    return;
                }
                let arg = &base + &sum_psi;
                match self.at_expiry.real(&arg) {
                    Some((phi, psi)) => {
                        let expo = shift - sum_phi - phi - psi.trace_prod(&self.sigma0);
                        total += coef * expo.exp();
                    }
                    None => failed = true,
                }
            });
            if failed || !total.is_finite() {
                return Err(PricingError::MomentBlowUp { q, measure });
            }
            out.push(total * factorial(q));
        }
        let norm = out[0];
        Ok(out[1..].iter().map(|&x| x / norm).collect())
    }

    /// Enumerates multisets of coupon indices of size `left` drawn from j.., passing
    /// Π c^n/n!, Σ φ and Σ ψ of the chosen u's.
    fn visit(
        &self,
        j: usize,
        left: usize,
        coef: Quad,
        sum_phi: Quad,
        sum_psi: Mat<Quad>,
        f: &mut dyn FnMut(Quad, Quad, Mat<Quad>),
    ) {
        let n = self.coupons.len();
        let (phi_j, psi_j, c_j) = (self.phi_tau[j + 1], &self.psi_tau[j + 1], self.coupons[j]);
        if j == n - 1 {
            let cnt = Quad::from_f64(left as f64);
            let mut c = coef;
            for r in 1..=left {
                c = c * c_j / Quad::from_f64(r as f64);
            }
            f(c, sum_phi + cnt * phi_j, &sum_psi + &psi_j.scale(cnt));
            return;
        }
        let mut c = coef;
        let mut sp = sum_phi;
        let mut sm = sum_psi;
        for cnt in 0..=left {
            if cnt > 0 {
                c = c * c_j / Quad::from_f64(cnt as f64);
                sp += phi_j;
                sm = &sm + psi_j;
            }
            self.visit(j + 1, left - cnt, c, sp, sm.clone(), f);
        }
    }
}

fn factorial(q: usize) -> Quad {
    (1..=q).fold(Quad::ONE, |acc, r| acc * Quad::from_f64(r as f64))
}

/// E^{P_{T_k}}[CB(T_i)^q].
pub fn coupon_bond_moment(
    lm: &LiborModel,
    spec: &SwaptionSpec,
    q: usize,
    measure: usize,
) -> Result<f64, PricingError> {
    if q == 0 {
        return Ok(1.0);
    }
    let engine = MomentEngine::new(lm, spec)?;
    Ok(engine.moments(measure, q)?[q - 1].to_f64())
}

/// Cumulants of CB(T_i) under P_{T_k}, computed from double-double moments.
pub fn coupon_bond_cumulants(
    engine: &MomentEngine,
    measure: usize,
    order: usize,
) -> Result<CumulantSet, PricingError> {
    let moments = engine.moments(measure, order)?;
    let kappa = cumulants_from_moments(&moments);
    let cumulants: Vec<f64> = kappa.iter().map(|k| k.to_f64()).collect();
    if !(cumulants[1] > 0.0) {
        return Err(PricingError::DegenerateDistribution(cumulants[1]));
    }
    Ok(CumulantSet {
        order,
        cumulants,
        measure,
    })
}

/// Per-measure pieces of a swaption price.
#[derive(Debug, Clone, PartialEq)]
pub struct SwaptionBreakdown {
    /// (k, P_{T_k}[CB(T_i) > 1]) for k = i..=m.
    pub exercise_probabilities: Vec<(usize, TailProbability)>,
    pub cumulants: Vec<CumulantSet>,
    pub receiver_raw: f64,
}

pub fn swaption_breakdown(
    lm: &LiborModel,
    spec: &SwaptionSpec,
    order: usize,
) -> Result<SwaptionBreakdown, PricingError> {
    if !(3..=MAX_ORDER).contains(&order) {
        return Err(PricingError::InvalidSpec(format!(
            "Edgeworth order {order} outside 3..={MAX_ORDER}"
        )));
    }
    let engine = MomentEngine::new(lm, spec)?;
    let sets: Result<Vec<CumulantSet>, PricingError> = (spec.i..=spec.m)
        .into_par_iter()
        .map(|k| coupon_bond_cumulants(&engine, k, order))
        .collect();
    let sets = sets?;
    let mut probs = Vec::with_capacity(sets.len());
    for cs in &sets {
        probs.push((cs.measure, edgeworth_tail(cs, 1.0)?));
    }
    let curve = lm.curve();
    let coupons = spec.coupons(lm.delta_t());
    let mut receiver = -curve.bond(spec.i) * probs[0].1.value;
    for (&(k, c), (_, p)) in coupons.iter().zip(&probs[1..]) {
        receiver += c * curve.bond(k) * p.value;
    }
    Ok(SwaptionBreakdown {
        exercise_probabilities: probs,
        cumulants: sets,
        receiver_raw: receiver,
    })
}

/// Swaption price with an Edgeworth expansion of the given order (3..=7).
pub fn price_swaption(lm: &LiborModel, spec: &SwaptionSpec, order: usize) -> Result<Priced, PricingError> {
    let b = swaption_breakdown(lm, spec, order)?;
    let mut diagnostics: Vec<Diagnostic> = b
        .exercise_probabilities
        .iter()
        .filter(|(_, p)| p.clamped)
        .map(|&(measure, p)| Diagnostic::ProbabilityClamped { measure, raw: p.raw })
        .collect();
    let raw = match spec.side {
        Side::Receiver => b.receiver_raw,
        Side::Payer => b.receiver_raw - spec.swap_value(lm),
    };
    let value = if raw < 0.0 {
        diagnostics.push(Diagnostic::Clipped { raw });
        0.0
    } else {
        raw
    };
    Ok(Priced { value, diagnostics })
}
