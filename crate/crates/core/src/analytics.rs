//! Black-76 inversion, caplet and swaption volatility surfaces, and the
//! frozen-coefficient skew correlation.

use rayon::prelude::*;
use roots::{find_root_brent, Convergency, SearchError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::affine::AffineModel;
use crate::caps::{CapletGrid, FourierConfig, PricingError};
use crate::libor::{LiborError, LiborModel};
use crate::matcore::{is_spd, SquareMat, SymMat};
use crate::swaptions::{price_swaption, Side, SwaptionSpec};

pub const VOL_MIN: f64 = 1e-6;
pub const VOL_MAX: f64 = 5.0;
pub const MAX_ITER: usize = 200;
/// Largest accepted |Black(σ) - price| at the returned σ.
pub const PRICE_TOL: f64 = 1e-12;

pub const SURFACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Lower,
    Upper,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VolError {
    #[error("price {price:e} outside the attainable range ({bound:?} limit {limit:e})")]
    OutOfBand { bound: Bound, price: f64, limit: f64 },
    #[error("implied volatility search did not converge")]
    NoConvergence,
    #[error("invalid Black inputs: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("instantaneous Libor volatility is zero")]
    ZeroVol,
    #[error("state matrix is not positive definite")]
    NotSpd,
    #[error("skew correlation needs a Wishart model")]
    UnsupportedModel,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Libor(#[from] LiborError),
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-76 price: discount · E[(F e^{σW_T - σ²T/2} - K)^±].
pub fn black_price(kind: OptionKind, forward: f64, strike: f64, vol: f64, expiry: f64, discount: f64) -> f64 {
    let s = vol * expiry.sqrt();
    if s == 0.0 {
        return discount * intrinsic(kind, forward, strike);
    }
    let d1 = ((forward / strike).ln() + 0.5 * s * s) / s;
    let d2 = d1 - s;
    match kind {
        OptionKind::Call => discount * (forward * norm_cdf(d1) - strike * norm_cdf(d2)),
        OptionKind::Put => discount * (strike * norm_cdf(-d2) - forward * norm_cdf(-d1)),
    }
}

fn intrinsic(kind: OptionKind, forward: f64, strike: f64) -> f64 {
    match kind {
        OptionKind::Call => (forward - strike).max(0.0),
        OptionKind::Put => (strike - forward).max(0.0),
    }
}

struct PriceTolerance;

impl Convergency<f64> for PriceTolerance {
    fn is_root_found(&mut self, y: f64) -> bool {
        y.abs() <= 1e-16
    }
    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= 4.0 * f64::EPSILON * x1.abs().max(x2.abs())
    }
    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= MAX_ITER
    }
}

/// Implied Black-76 call volatility.
pub fn black_implied_vol(price: f64, forward: f64, strike: f64, expiry: f64, discount: f64) -> Result<f64, VolError> {
    black_implied_vol_kind(OptionKind::Call, price, forward, strike, expiry, discount)
}

pub fn black_implied_vol_kind(
    kind: OptionKind,
    price: f64,
    forward: f64,
    strike: f64,
    expiry: f64,
    discount: f64,
) -> Result<f64, VolError> {
    let positive = |x: f64| x > 0.0 && x.is_finite();
    if !(positive(forward) && positive(strike) && positive(expiry) && positive(discount) && price.is_finite()) {
        return Err(VolError::InvalidInput(format!(
            "F = {forward}, K = {strike}, T = {expiry}, df = {discount}, price = {price}"
        )));
    }
    let lower = discount * intrinsic(kind, forward, strike);
    let upper = discount
        * match kind {
            OptionKind::Call => forward,
            OptionKind::Put => strike,
        };
    if price <= lower {
        return Err(VolError::OutOfBand { bound: Bound::Lower, price, limit: lower });
    }
    if price >= upper {
        return Err(VolError::OutOfBand { bound: Bound::Upper, price, limit: upper });
    }
    let f = |v: f64| black_price(kind, forward, strike, v, expiry, discount) - price;
    let (f_lo, f_hi) = (f(VOL_MIN), f(VOL_MAX));
    if f_lo > 0.0 {
        return Err(VolError::OutOfBand { bound: Bound::Lower, price, limit: f_lo + price });
    }
    if f_hi < 0.0 {
        return Err(VolError::OutOfBand { bound: Bound::Upper, price, limit: f_hi + price });
    }
    let vol = match find_root_brent(VOL_MIN, VOL_MAX, f, &mut PriceTolerance) {
        Ok(v) => v,
        Err(SearchError::NoConvergency) | Err(SearchError::ZeroDerivative) => return Err(VolError::NoConvergence),
        Err(SearchError::NoBracketing) => return Err(VolError::NoConvergence),
    };
    if f(vol).abs() > PRICE_TOL {
        return Err(VolError::NoConvergence);
    }
    Ok(vol)
}

/// Correlation between Libor and its volatility with frozen coefficients:
/// tr[BQᵀQBQᵀQBΣ] / (√tr[QBΣBᵀQᵀ] · √tr[ΣBQᵀQBQᵀQBQᵀQB]).
pub fn skew_from_matrices(b: &SymMat, q: &SquareMat, sigma: &SymMat) -> Result<f64, AnalyticsError> {
    if !is_spd(sigma, 0.0) {
        return Err(AnalyticsError::NotSpd);
    }
    let b = b.as_mat();
    let s = sigma.as_mat();
    let qtq = &q.transpose() * q;
    let bqqb = &(b * &qtq) * b;
    let num = (&(&bqqb * &qtq) * b).trace_prod(s);
    let vol2 = (&(&(q * b) * s) * &(b.transpose() * q.transpose())).trace();
    if !(vol2 > 0.0) {
        return Err(AnalyticsError::ZeroVol);
    }
    let fourth = (&(&bqqb * &qtq) * &bqqb).trace_prod(s);
    Ok((num / (vol2.sqrt() * fourth.sqrt())).clamp(0.0, 1.0))
}

/// Skew correlation of the Libor L(t, T_k, T_{k+1}) in state Σ_t = sigma.
pub fn skew_correlation(lm: &LiborModel, k: usize, t: f64, sigma: &SymMat) -> Result<f64, AnalyticsError> {
    let q = match lm.model() {
        AffineModel::Wishart(p) => p.q().clone(),
        AffineModel::JumpOu(_) => return Err(AnalyticsError::UnsupportedModel),
    };
    let fc = lm.forward_coeffs(k, t)?;
    skew_from_matrices(&fc.b, &q, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Caplet,
    SwaptionAtm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMetadata {
    /// Short SHA-256 of the model, curve and fitted family.
    pub model_hash: String,
    pub config: serde_json::Value,
}

/// A cell whose implied volatility could not be recovered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub row: usize,
    pub col: usize,
    pub reason: String,
}

/// Prices and implied vols on a (maturity × column) grid.
///
/// Caplet grids have strike columns. ATM swaption grids have swap-length
/// columns (in tenor periods) and leave `strikes` empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub schema_version: u32,
    pub kind: SurfaceKind,
    pub strikes: Vec<f64>,
    pub swap_lengths: Vec<usize>,
    /// Tenor indices of the expiries.
    pub maturities: Vec<usize>,
    pub maturity_years: Vec<f64>,
    /// Strike actually used in each cell.
    pub cell_strikes: Vec<Vec<f64>>,
    pub prices: Vec<Vec<f64>>,
    pub implied_vols: Vec<Vec<Option<f64>>>,
    pub failures: Vec<CellFailure>,
    pub metadata: SurfaceMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceValues {
    Prices,
    ImpliedVols,
}

impl SurfaceGrid {
    pub fn n_rows(&self) -> usize {
        self.maturities.len()
    }

    pub fn n_cols(&self) -> usize {
        match self.kind {
            SurfaceKind::Caplet => self.strikes.len(),
            SurfaceKind::SwaptionAtm => self.swap_lengths.len(),
        }
    }

    /// CSV with a `#` version line, a header of column values, and one row per maturity.
    /// Failed vol cells are left empty.
    pub fn to_csv(&self, values: SurfaceValues) -> String {
        let what = match values {
            SurfaceValues::Prices => "price",
            SurfaceValues::ImpliedVols => "implied_vol",
        };
        let kind = match self.kind {
            SurfaceKind::Caplet => "caplet",
            SurfaceKind::SwaptionAtm => "swaption_atm",
        };
        let mut out = format!(
            "# schema_version={} kind={kind} values={what} model={}\n",
            self.schema_version, self.metadata.model_hash
        );
        let header: Vec<String> = match self.kind {
            SurfaceKind::Caplet => self.strikes.iter().map(|k| k.to_string()).collect(),
            SurfaceKind::SwaptionAtm => self.swap_lengths.iter().map(|l| l.to_string()).collect(),
        };
        out.push_str("maturity,");
        out.push_str(&header.join(","));
        out.push('\n');
        for (r, t) in self.maturity_years.iter().enumerate() {
            let cells: Vec<String> = match values {
                SurfaceValues::Prices => self.prices[r].iter().map(|p| p.to_string()).collect(),
                SurfaceValues::ImpliedVols => self.implied_vols[r]
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
                    .collect(),
            };
            out.push_str(&format!("{t},{}\n", cells.join(",")));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("surface serializes")
    }
}

/// Short content hash identifying a fitted model.
pub fn model_hash(lm: &LiborModel) -> String {
    let digest = Sha256::digest(format!("{lm:?}").as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn check_sorted<T: PartialOrd + Copy>(xs: &[T], what: &str) -> Result<(), AnalyticsError> {
    if xs.is_empty() {
        return Err(AnalyticsError::InvalidGrid(format!("{what} is empty")));
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(AnalyticsError::InvalidGrid(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

fn caplet_vol(lm: &LiborModel, k: usize, strike: f64, price: f64) -> Result<f64, VolError> {
    let curve = lm.curve();
    black_implied_vol(
        price / lm.delta_t(),
        curve.forward_libor(k),
        strike,
        curve.maturity(k),
        curve.bond(k + 1),
    )
}

fn check_tenors(lm: &LiborModel, tenors: &[usize]) -> Result<(), AnalyticsError> {
    check_sorted(tenors, "tenor indices")?;
    let n = lm.n_tenors();
    if tenors[0] < 1 || *tenors.last().unwrap() >= n {
        return Err(AnalyticsError::InvalidGrid(format!("caplet tenors must lie in 1..={}", n - 1)));
    }
    Ok(())
}

/// Caplet prices and Black vols on strikes × tenor indices.
pub fn build_caplet_surface(
    lm: &LiborModel,
    strikes: &[f64],
    tenors: &[usize],
    cfg: &FourierConfig,
) -> Result<SurfaceGrid, AnalyticsError> {
    check_sorted(strikes, "strikes")?;
    check_tenors(lm, tenors)?;
    let grids: Result<Vec<CapletGrid>, PricingError> =
        tenors.par_iter().map(|&k| CapletGrid::build(lm, k, cfg)).collect();
    let grids = grids?;
    let mut prices = Vec::with_capacity(tenors.len());
    let mut vols = Vec::with_capacity(tenors.len());
    let mut failures = Vec::new();
    for (r, (grid, &k)) in grids.iter().zip(tenors).enumerate() {
        let row: Vec<f64> = strikes.iter().map(|&s| grid.price(s).value).collect();
        let vrow = row
            .iter()
            .zip(strikes)
            .enumerate()
            .map(|(c, (&p, &s))| match caplet_vol(lm, k, s, p) {
                Ok(v) => Some(v),
                Err(e) => {
                    failures.push(CellFailure { row: r, col: c, reason: e.to_string() });
                    None
                }
            })
            .collect();
        prices.push(row);
        vols.push(vrow);
    }
    Ok(SurfaceGrid {
        schema_version: SURFACE_SCHEMA_VERSION,
        kind: SurfaceKind::Caplet,
        strikes: strikes.to_vec(),
        swap_lengths: Vec::new(),
        maturities: tenors.to_vec(),
        maturity_years: tenors.iter().map(|&k| lm.maturity(k)).collect(),
        cell_strikes: vec![strikes.to_vec(); tenors.len()],
        prices,
        implied_vols: vols,
        failures,
        metadata: SurfaceMetadata {
            model_hash: model_hash(lm),
            config: serde_json::json!({ "fourier": cfg }),
        },
    })
}

/// One point of the ATM caplet volatility term structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmPoint {
    pub k: usize,
    pub maturity: f64,
    pub strike: f64,
    pub price: f64,
    pub vol: Option<f64>,
}

/// ATM (strike = forward Libor) caplet vols per tenor.
pub fn atm_term_structure(
    lm: &LiborModel,
    tenors: &[usize],
    cfg: &FourierConfig,
) -> Result<Vec<AtmPoint>, AnalyticsError> {
    check_tenors(lm, tenors)?;
    tenors
        .par_iter()
        .map(|&k| {
            let grid = CapletGrid::build(lm, k, cfg)?;
            let strike = lm.curve().forward_libor(k);
            let price = grid.price(strike).value;
            Ok(AtmPoint {
                k,
                maturity: lm.maturity(k),
                strike,
                price,
                vol: caplet_vol(lm, k, strike, price).ok(),
            })
        })
        .collect()
}

/// Par swap rate and annuity ΔT·Σ B(0,T_k) of the swap over (T_i, T_m].
pub fn par_swap_rate(lm: &LiborModel, i: usize, m: usize) -> (f64, f64) {
    let curve = lm.curve();
    let annuity = lm.delta_t() * (i + 1..=m).map(|k| curve.bond(k)).sum::<f64>();
    ((curve.bond(i) - curve.bond(m)) / annuity, annuity)
}

/// ATM receiver swaption prices and Black vols on expiries × swap lengths.
pub fn atm_swaption_surface(
    lm: &LiborModel,
    expiries: &[usize],
    swap_lengths: &[usize],
    order: usize,
) -> Result<SurfaceGrid, AnalyticsError> {
    check_sorted(expiries, "expiries")?;
    check_sorted(swap_lengths, "swap lengths")?;
    let n = lm.n_tenors();
    if expiries[0] < 1 || swap_lengths[0] < 1 || expiries.last().unwrap() + swap_lengths.last().unwrap() > n {
        return Err(AnalyticsError::InvalidGrid(format!(
            "need expiry >= 1, length >= 1 and expiry + length <= {n}"
        )));
    }
    let cells: Vec<(usize, usize)> = expiries
        .iter()
        .flat_map(|&i| swap_lengths.iter().map(move |&l| (i, l)))
        .collect();
    let priced: Result<Vec<(f64, f64, Result<f64, VolError>)>, PricingError> = cells
        .par_iter()
        .map(|&(i, l)| {
            let (rate, annuity) = par_swap_rate(lm, i, i + l);
            let spec = SwaptionSpec::new(i, i + l, rate, Side::Receiver);
            let price = price_swaption(lm, &spec, order)?.value;
            let vol = black_implied_vol_kind(OptionKind::Put, price, rate, rate, lm.maturity(i), annuity);
            Ok((rate, price, vol))
        })
        .collect();
    let priced = priced?;
    let cols = swap_lengths.len();
    let mut failures = Vec::new();
    let mut prices = vec![vec![0.0; cols]; expiries.len()];
    let mut strikes = prices.clone();
    let mut vols = vec![vec![None; cols]; expiries.len()];
    for (idx, (rate, price, vol)) in priced.into_iter().enumerate() {
        let (r, c) = (idx / cols, idx % cols);
        prices[r][c] = price;
        strikes[r][c] = rate;
        match vol {
            Ok(v) => vols[r][c] = Some(v),
            Err(e) => failures.push(CellFailure { row: r, col: c, reason: e.to_string() }),
        }
    }
    Ok(SurfaceGrid {
        schema_version: SURFACE_SCHEMA_VERSION,
        kind: SurfaceKind::SwaptionAtm,
        strikes: Vec::new(),
        swap_lengths: swap_lengths.to_vec(),
        maturities: expiries.to_vec(),
        maturity_years: expiries.iter().map(|&i| lm.maturity(i)).collect(),
        cell_strikes: strikes,
        prices,
        implied_vols: vols,
        failures,
        metadata: SurfaceMetadata {
            model_hash: model_hash(lm),
            config: serde_json::json!({ "edgeworth_order": order }),
        },
    })
}
