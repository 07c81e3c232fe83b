//! Caplets, floorlets and caps by damped Fourier inversion under the
//! T_{k+1}-forward measure.
//!
//! With Y = log(B(T_k,T_k)/B(T_k,T_{k+1})) the caplet pays (e^Y - 𝒦)^+ at
//! T_{k+1}, 𝒦 = 1 + ΔT·K. The integrand is evaluated on geometric panels
//! [0, v₁], [v₁, 2v₁], [2v₁, 4v₁], … and integrated with a Filon rule after
//! factoring out the oscillation at the forward log-price.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{AffineError, Horizon};
use crate::libor::{forward_from, LiborError, LiborModel};
use crate::matcore::{CSymMat, SymMat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("invalid instrument: {0}")]
    InvalidSpec(String),
    #[error("invalid Fourier configuration: {0}")]
    InvalidConfig(String),
    #[error("transform blows up at v = {v} (damping too large for this model?)")]
    TransformBlowUp { v: f64 },
    #[error("transform blows up in moment of order {q} under measure {measure}")]
    MomentBlowUp { q: usize, measure: usize },
    #[error("degenerate distribution: variance {0:e}")]
    DegenerateDistribution(f64),
    #[error(transparent)]
    Libor(#[from] LiborError),
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// Non-fatal observations attached to a price.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// The outermost panel still carried this fraction of the integral.
    ConvergenceWarning { tail_fraction: f64 },
    /// Raw value was negative and has been clipped to zero.
    Clipped { raw: f64 },
    /// An Edgeworth tail probability left [0, 1] and was clamped.
    ProbabilityClamped { measure: usize, raw: f64 },
}

/// A price with any diagnostics raised while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Priced {
    pub value: f64,
    pub diagnostics: Vec<Diagnostic>,
}

/// Caplet on the Libor fixing at T_k, paid at T_{k+1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapletSpec {
    pub k: usize,
    pub strike: f64,
    pub notional: f64,
}

impl CapletSpec {
    pub fn new(k: usize, strike: f64) -> Self {
        CapletSpec {
            k,
            strike,
            notional: 1.0,
        }
    }

    /// 𝒦 = 1 + ΔT·K.
    pub fn strike_factor(&self, delta_t: f64) -> f64 {
        1.0 + delta_t * self.strike
    }

    pub fn validate(&self, lm: &LiborModel) -> Result<(), PricingError> {
        let n = lm.n_tenors();
        if self.k < 1 || self.k > n - 1 {
            return Err(PricingError::InvalidSpec(format!(
                "caplet index {} outside 1..={}",
                self.k,
                n - 1
            )));
        }
        if !(self.strike_factor(lm.delta_t()) > 0.0) || !self.strike.is_finite() {
            return Err(PricingError::InvalidSpec(format!(
                "strike {} must exceed -1/ΔT",
                self.strike
            )));
        }
        if !(self.notional > 0.0) {
            return Err(PricingError::InvalidSpec("notional must be positive".into()));
        }
        Ok(())
    }
}

/// Damping and integration grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierConfig {
    pub alpha: f64,
    /// Intervals per panel (even).
    pub n_nodes: usize,
    /// Width of the first panel.
    pub v_first: f64,
    /// Truncation point; panels double until they reach it.
    pub v_max: f64,
}

impl Default for FourierConfig {
    fn default() -> Self {
        FourierConfig {
            alpha: 1.0,
            n_nodes: 4096,
            v_first: 1.0,
            v_max: 65536.0,
        }
    }
}

impl FourierConfig {
    pub fn with_alpha(self, alpha: f64) -> Self {
        FourierConfig { alpha, ..self }
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(PricingError::InvalidConfig("alpha must be positive".into()));
        }
        if self.n_nodes < 2 || !self.n_nodes.is_multiple_of(2) {
            return Err(PricingError::InvalidConfig("n_nodes must be even and at least 2".into()));
        }
        if !(self.v_first > 0.0 && self.v_max >= self.v_first) {
            return Err(PricingError::InvalidConfig("need 0 < v_first <= v_max".into()));
        }
        Ok(())
    }
}

/// Evaluates E^{P_{k+1}}[e^{zY}] for complex z, with the horizon work cached.
#[derive(Debug, Clone)]
pub struct CapletCf {
    k: usize,
    a_k: f64,
    b_k: SymMat,
    psi_next: SymMat,
    log_const: f64,
    at_fixing: Horizon,
    sigma0: SymMat,
}

impl CapletCf {
    pub fn new(lm: &LiborModel, k: usize) -> Result<Self, PricingError> {
        let n = lm.n_tenors();
        if k < 1 || k > n - 1 {
            return Err(PricingError::InvalidSpec(format!("caplet index {k} outside 1..={}", n - 1)));
        }
        let model = lm.model();
        let t_n = lm.curve().horizon();
        let t_k = lm.maturity(k);
        let fam = lm.family();
        let blow = |scale| LiborError::TransformBlowUp { scale };

        let h_rest = model.horizon(t_n - t_k)?;
        let ck = h_rest.real(fam.u(k)).ok_or(blow(fam.xis()[k - 1]))?;
        let ck1 = h_rest.real(fam.u(k + 1)).ok_or(blow(fam.xis()[k]))?;
        let fwd = forward_from(k, t_k, &ck, &ck1)?;
        let full = model
            .horizon(t_n)?
            .real(fam.u(k + 1))
            .ok_or(blow(fam.xis()[k]))?;
        // log(1/M^{u_{k+1}}_0) - φ_{T_N-T_k}(u_{k+1})
        let log_const = -ck1.phi + full.phi + full.psi.trace_prod(model.sigma0());
        Ok(CapletCf {
            k,
            a_k: fwd.a,
            b_k: fwd.b,
            psi_next: ck1.psi,
            log_const,
            at_fixing: model.horizon(t_k)?,
            sigma0: model.sigma0().clone(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Forward coefficient B_k at the fixing date.
    pub fn b_k(&self) -> &SymMat {
        &self.b_k
    }

    /// E^{P_{k+1}}[exp(zY)] and the updated log-det phase; `None` if the transform is infinite.
    pub fn eval(&self, z: Complex64, prev_phase: f64) -> Option<(Complex64, f64)> {
        let w = self.psi_next.to_complex().as_mat() - &self.b_k.to_complex().scale(z);
        let c = self.at_fixing.coeffs(&CSymMat::from_symmetric_part(&w), prev_phase);
        if !c.valid {
            return None;
        }
        let tr = c.psi.trace_prod(&self.sigma0.to_complex());
        let expo = z * self.a_k + self.log_const - c.phi - tr;
        Some((expo.exp(), c.phase))
    }
}

/// E^{P_{k+1}}[e^{i(v - (α+1)i)Y}], the damped characteristic function at v.
pub fn caplet_cf(
    lm: &LiborModel,
    k: usize,
    v: f64,
    alpha: f64,
    prev_phase: f64,
) -> Result<(Complex64, f64), PricingError> {
    let cf = CapletCf::new(lm, k)?;
    cf.eval(Complex64::new(alpha + 1.0, v), prev_phase)
        .ok_or(PricingError::TransformBlowUp { v })
}

/// Strike-independent integrand samples for one (k, α).
#[derive(Debug, Clone)]
pub struct CapletGrid {
    k: usize,
    alpha: f64,
    /// log of the forward price B(0,T_k)/B(0,T_{k+1}); the oscillation e^{iv·y_c} is factored out.
    y_c: f64,
    panels: Vec<Panel>,
    reached_v_max: bool,
    discount_next: f64,
    discount_fix: f64,
    delta_t: f64,
}

#[derive(Debug, Clone)]
struct Panel {
    start: f64,
    h: f64,
    /// g̃(v) = CF(v) e^{-i v y_c} / ((α + iv)(α + 1 + iv)) at start + j·h.
    values: Vec<Complex64>,
}

impl CapletGrid {
    pub fn build(lm: &LiborModel, k: usize, cfg: &FourierConfig) -> Result<Self, PricingError> {
        cfg.validate()?;
        let cf = CapletCf::new(lm, k)?;
        let curve = lm.curve();
        let y_c = (curve.ratio(k) / curve.ratio(k + 1)).ln();
        let alpha = cfg.alpha;
        let mut phase = 0.0;
        let mut panels = Vec::new();
        let mut start = 0.0;
        let mut width = cfg.v_first;
        let mut reached_v_max = true;
        loop {
            let end = (start + width).min(cfg.v_max);
            let h = (end - start) / cfg.n_nodes as f64;
            let mut values = Vec::with_capacity(cfg.n_nodes + 1);
            let mut peak: f64 = 0.0;
            for j in 0..=cfg.n_nodes {
                let v = start + j as f64 * h;
                let z = Complex64::new(alpha + 1.0, v);
                let (c, p) = cf.eval(z, phase).ok_or(PricingError::TransformBlowUp { v })?;
                phase = p;
                let denom = Complex64::new(alpha, v) * z;
                let g = c * Complex64::from_polar(1.0, -v * y_c) / denom;
                peak = peak.max(g.norm());
                values.push(g);
            }
            panels.push(Panel { start, h, values });
            if end >= cfg.v_max {
                break;
            }
            if peak * (end - start) < 1e-18 {
                reached_v_max = false;
                break;
            }
            start = end;
            width = end;
        }
        Ok(CapletGrid {
            k,
            alpha,
            y_c,
            panels,
            reached_v_max,
            discount_next: curve.bond(k + 1),
            discount_fix: curve.bond(k),
            delta_t: curve.delta_t(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Caplet price for strike factor 𝒦 (unit notional).
    pub fn price_factor(&self, strike_factor: f64) -> Priced {
        let c = strike_factor.ln();
        let omega = self.y_c - c;
        let mut total = Complex64::new(0.0, 0.0);
        let mut last = Complex64::new(0.0, 0.0);
        for p in &self.panels {
            last = filon(p, omega);
            total += last;
        }
        let integral = total.re;
        let raw = self.discount_next * (-self.alpha * c).exp() / std::f64::consts::PI * integral;
        let mut diagnostics = Vec::new();
        if self.reached_v_max {
            let frac = last.re.abs() / integral.abs().max(f64::MIN_POSITIVE);
            if frac > 1e-8 {
                diagnostics.push(Diagnostic::ConvergenceWarning { tail_fraction: frac });
            }
        }
        let value = if raw < 0.0 {
            diagnostics.push(Diagnostic::Clipped { raw });
            0.0
        } else {
            raw
        };
        Priced { value, diagnostics }
    }

    pub fn price(&self, strike: f64) -> Priced {
        self.price_factor(1.0 + self.delta_t * strike)
    }

    /// Floorlet by parity: caplet - B(0,T_k) + 𝒦·B(0,T_{k+1}).
    pub fn floorlet(&self, strike: f64) -> Priced {
        let factor = 1.0 + self.delta_t * strike;
        let cap = self.price_factor(factor);
        let raw = cap.value - self.discount_fix + factor * self.discount_next;
        let mut diagnostics = cap.diagnostics;
        let value = if raw < 0.0 {
            if raw < -1e-10 {
                diagnostics.push(Diagnostic::Clipped { raw });
            }
            0.0
        } else {
            raw
        };
        Priced { value, diagnostics }
    }
}

/// ∫ over one panel of e^{iωv}·g̃(v) with g̃ interpolated quadratically on node pairs.
fn filon(p: &Panel, omega: f64) -> Complex64 {
    let h = p.h;
    let theta = omega * h;
    let (m0, m1, m2) = moments(theta);
    let mut acc = Complex64::new(0.0, 0.0);
    let rot = Complex64::from_polar(1.0, 2.0 * theta);
    let mut e = Complex64::from_polar(1.0, omega * (p.start + h));
    for j in (0..p.values.len() - 2).step_by(2) {
        let g0 = p.values[j];
        let g1 = p.values[j + 1];
        let g2 = p.values[j + 2];
        let piece = g1 * m0 + (g2 - g0) * 0.5 * m1 + (g0 - g1 * 2.0 + g2) * 0.5 * m2;
        acc += e * piece;
        e *= rot;
    }
    acc * h
}

/// ∫_{-1}^{1} s^j e^{iθs} ds for j = 0, 1, 2.
fn moments(theta: f64) -> (Complex64, Complex64, Complex64) {
    if theta.abs() < 0.5 {
        let t2 = theta * theta;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        let mut even = 1.0; // (-1)^j θ^{2j} / (2j)!
        let mut odd = theta; // (-1)^j θ^{2j+1} / (2j+1)!
        for j in 0..12 {
            let jf = j as f64;
            m0 += even * 2.0 / (2.0 * jf + 1.0);
            m2 += even * 2.0 / (2.0 * jf + 3.0);
            m1 += odd * 2.0 / (2.0 * jf + 3.0);
            even *= -t2 / ((2.0 * jf + 1.0) * (2.0 * jf + 2.0));
            odd *= -t2 / ((2.0 * jf + 2.0) * (2.0 * jf + 3.0));
        }
        (
            Complex64::new(m0, 0.0),
            Complex64::new(0.0, m1),
            Complex64::new(m2, 0.0),
        )
    } else {
        let (s, c) = theta.sin_cos();
        let t2 = theta * theta;
        (
            Complex64::new(2.0 * s / theta, 0.0),
            Complex64::new(0.0, 2.0 * (s - theta * c) / t2),
            Complex64::new(2.0 * ((t2 - 2.0) * s + 2.0 * theta * c) / (t2 * theta), 0.0),
        )
    }
}

fn scale_notional(mut p: Priced, notional: f64) -> Priced {
    p.value *= notional;
    p
}

pub fn price_caplet(lm: &LiborModel, spec: &CapletSpec, cfg: &FourierConfig) -> Result<Priced, PricingError> {
    spec.validate(lm)?;
    let grid = CapletGrid::build(lm, spec.k, cfg)?;
    Ok(scale_notional(grid.price(spec.strike), spec.notional))
}

pub fn price_floorlet(lm: &LiborModel, spec: &CapletSpec, cfg: &FourierConfig) -> Result<Priced, PricingError> {
    spec.validate(lm)?;
    let grid = CapletGrid::build(lm, spec.k, cfg)?;
    Ok(scale_notional(grid.floorlet(spec.strike), spec.notional))
}

/// Sum of caplets with fixings k_first..=k_last at a common strike.
pub fn price_cap(
    lm: &LiborModel,
    k_first: usize,
    k_last: usize,
    strike: f64,
    cfg: &FourierConfig,
) -> Result<Priced, PricingError> {
    if k_first > k_last {
        return Err(PricingError::InvalidSpec("k_first must not exceed k_last".into()));
    }
    for k in [k_first, k_last] {
        CapletSpec::new(k, strike).validate(lm)?;
    }
    let parts: Result<Vec<Priced>, PricingError> = (k_first..=k_last)
        .into_par_iter()
        .map(|k| Ok(CapletGrid::build(lm, k, cfg)?.price(strike)))
        .collect();
    let mut out = Priced {
        value: 0.0,
        diagnostics: Vec::new(),
    };
    for p in parts? {
        out.value += p.value;
        out.diagnostics.extend(p.diagnostics);
    }
    Ok(out)
}
