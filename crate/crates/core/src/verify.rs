//! Acceptance suite: eleven checks, each reported as pass/fail with a detail line.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::affine::{riccati_rk4, AffineModel, JumpOuParams, WishartParams};
use crate::analytics::{atm_term_structure, build_caplet_surface, par_swap_rate, skew_correlation, skew_from_matrices};
use crate::caps::{CapletGrid, CapletSpec, FourierConfig};
use crate::libor::{FitOptions, LiborModel, TenorCurve};
use crate::matcore::{solve_lyapunov, SquareMat, SymMat};
use crate::oracle::{mc_caplet_grid, mc_coupon_bond_moments, mc_laplace, mc_martingale, mc_price, Instrument, McConfig, Scheme};
use crate::swaptions::{coupon_bond_moment, price_swaption, Side, SwaptionSpec};

const DELTA_T: f64 = 1.0 / 3.0;
const N_TENORS: usize = 12;
const FLAT_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Reduced path counts, no runtime budgets.
    Quick,
    /// Full path counts with per-criterion runtime budgets.
    Full,
}

impl Suite {
    fn paths(self, full: usize) -> usize {
        match self {
            Suite::Quick => full / 10,
            Suite::Full => full,
        }
    }
}

pub const TITLES: [&str; 11] = [
    "transform vs RK4",
    "flow property",
    "martingale and positivity",
    "curve fit",
    "caplet pricing",
    "swaption pricing",
    "moment engine",
    "skew range",
    "directional parameter effects",
    "jump model transform",
    "Lyapunov mean",
];

const BUDGETS: [u64; 11] = [10, 5, 120, 30, 300, 600, 180, 60, 600, 120, 10];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<30} {} ({:.1}s) {}",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub results: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failed_ids(&self) -> Vec<usize> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.id).collect()
    }
}

/// Runs all criteria in order.
pub fn run(suite: Suite, seed: u64) -> VerifyReport {
    run_with(suite, seed, |_| {})
}

/// Runs all criteria, handing each result to `on_result` as it completes.
pub fn run_with(suite: Suite, seed: u64, mut on_result: impl FnMut(&CriterionResult)) -> VerifyReport {
    let results = (1..=11)
        .map(|id| {
            let r = run_criterion(id, suite, seed);
            on_result(&r);
            r
        })
        .collect();
    VerifyReport { suite, seed, results }
}

/// Runs one criterion (1..=11).
pub fn run_criterion(id: usize, suite: Suite, seed: u64) -> CriterionResult {
    assert!((1..=11).contains(&id), "criterion id {id} out of range");
    let start = Instant::now();
    let seed = seed.wrapping_add(id as u64);
    let outcome = match id {
        1 => transform_vs_rk4(seed),
        2 => flow_property(seed),
        3 => martingale(suite, seed),
        4 => curve_fit(),
        5 => caplets(suite, seed),
        6 => swaptions(suite, seed),
        7 => moments(suite, seed),
        8 => skew(seed),
        9 => directional(),
        10 => jump_transform(suite, seed),
        _ => lyapunov(),
    };
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match outcome {
        Ok(c) => (c.passed, c.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let budget = Duration::from_secs(BUDGETS[id - 1]);
    if suite == Suite::Full && elapsed > budget {
        passed = false;
        detail.push_str(&format!("; over the {}s budget", budget.as_secs()));
    }
    CriterionResult {
        id,
        title: TITLES[id - 1],
        passed,
        detail,
        seconds: elapsed.as_secs_f64(),
    }
}

struct Check {
    passed: bool,
    detail: String,
}

type Outcome = Result<Check, Box<dyn std::error::Error>>;

fn check(passed: bool, detail: String) -> Outcome {
    Ok(Check { passed, detail })
}

fn benchmark_model() -> Result<LiborModel, Box<dyn std::error::Error>> {
    fitted(AffineModel::Wishart(WishartParams::benchmark()))
}

fn fitted(model: AffineModel) -> Result<LiborModel, Box<dyn std::error::Error>> {
    let curve = TenorCurve::flat(DELTA_T, N_TENORS, FLAT_RATE)?;
    Ok(LiborModel::fit(model, curve, None, &FitOptions::default())?)
}

fn mc(n_paths: usize, seed: u64) -> McConfig {
    McConfig::for_tenor(DELTA_T, Scheme::ExactSquaredOu, n_paths, seed)
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> SymMat {
    let a = SquareMat::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    SymMat::from_symmetric_part(&(&a * &a.transpose())).scale(scale)
}

fn transform_vs_rk4(seed: u64) -> Outcome {
    let p = WishartParams::benchmark();
    let model = AffineModel::Wishart(p.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let tau = rng.random_range(0.0..=3.0);
        let u = random_psd(&mut rng, 2, 1.0);
        let c = model.real_coeffs(tau, &u)?.ok_or("transform undefined on u ⪰ 0")?;
        let (phi, psi) = riccati_rk4(&p, tau, &u, 2000);
        worst = worst
            .max((c.phi - phi).abs())
            .max(c.psi.as_slice().iter().zip(psi.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    check(worst <= 1e-8, format!("max abs error {worst:.2e} (limit 1e-8)"))
}

fn flow_property(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for model in [
        AffineModel::Wishart(WishartParams::benchmark()),
        AffineModel::JumpOu(JumpOuParams::reference()),
    ] {
        for _ in 0..100 {
            let u = random_psd(&mut rng, 2, 1.0);
            let t = rng.random_range(0.0..2.0);
            let s = rng.random_range(0.0..2.0);
            let a = model.real_coeffs(t, &u)?.ok_or("undefined")?;
            let b = model.real_coeffs(s, &a.psi)?.ok_or("undefined")?;
            let ts = model.real_coeffs(t + s, &u)?.ok_or("undefined")?;
            let r = (ts.phi - a.phi - b.phi)
                .abs()
                .max((ts.psi.as_mat() - b.psi.as_mat()).frobenius());
            worst = worst.max(r);
        }
    }
    check(worst <= 1e-9, format!("max residual {worst:.2e} over 200 triples (limit 1e-9)"))
}

fn martingale(suite: Suite, seed: u64) -> Outcome {
    let lm = benchmark_model()?;
    let r = mc_martingale(&lm, &mc(suite.paths(200_000), seed))?;
    let worst = r
        .checks
        .iter()
        .map(|c| c.estimate.z_score(c.target).abs())
        .fold(0.0, f64::max);
    let ok = worst <= 3.0 && r.min_value > 1.0;
    check(
        ok,
        format!(
            "{} checks, max |z| {worst:.2} (limit 3), min M {:.6} (must exceed 1)",
            r.checks.len(),
            r.min_value
        ),
    )
}

fn curve_fit() -> Outcome {
    let lm = benchmark_model()?;
    let model = lm.model();
    let fam = lm.family();
    let curve = lm.curve();
    let mut worst: f64 = 0.0;
    for k in 1..=N_TENORS {
        let f = model.laplace_real(curve.horizon(), fam.u(k))?.ok_or("undefined")?;
        worst = worst.max((f - curve.ratio(k)).abs() / curve.ratio(k));
    }
    let decreasing = fam.xis().windows(2).all(|w| w[0] > w[1]);
    check(
        worst <= 1e-12 && decreasing,
        format!("max relative residual {worst:.2e} (limit 1e-12), ξ strictly decreasing: {decreasing}"),
    )
}

fn caplets(suite: Suite, seed: u64) -> Outcome {
    let lm = benchmark_model()?;
    let curve = lm.curve();
    let cfg = FourierConfig::default();
    let tenors = [1, 4, 8];
    let fwd = curve.forward_libor(1);
    let strikes: Vec<f64> = (-4..=4).map(|j| fwd + 0.0005 * j as f64).collect();
    let grid = mc_caplet_grid(&lm, &tenors, &strikes, &mc(suite.paths(200_000), seed))?;
    let (mut z_max, mut itm, mut parity, mut alpha): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for (r, &k) in tenors.iter().enumerate() {
        let base = CapletGrid::build(&lm, k, &cfg)?;
        let lo = CapletGrid::build(&lm, k, &cfg.with_alpha(0.75))?;
        let hi = CapletGrid::build(&lm, k, &cfg.with_alpha(1.5))?;
        for (c, &s) in strikes.iter().enumerate() {
            let p = base.price(s).value;
            z_max = z_max.max(grid[r][c].z_score(p).abs());
            let f = base.floorlet(s).value;
            let fwd_value = curve.bond(k) - (1.0 + DELTA_T * s) * curve.bond(k + 1);
            parity = parity.max((p - f - fwd_value).abs());
            let (a, b) = (lo.price(s).value, hi.price(s).value);
            alpha = alpha.max(((a - b) / a).abs());
        }
        let kf = 1e-6;
        let exact = curve.bond(k) - kf * curve.bond(k + 1);
        itm = itm.max(((base.price_factor(kf).value - exact) / exact).abs());
    }
    let ok = z_max <= 3.0 && itm <= 1e-5 && parity <= 1e-10 && alpha <= 1e-7;
    check(
        ok,
        format!(
            "27 cells max |z| {z_max:.2} (3), deep ITM {itm:.1e} (1e-5), parity {parity:.1e} (1e-10), α-invariance {alpha:.1e} (1e-7)"
        ),
    )
}

fn swaptions(suite: Suite, seed: u64) -> Outcome {
    let lm = benchmark_model()?;
    let cfg = FourierConfig::default();
    let mut z_max: f64 = 0.0;
    let mut decay = true;
    let mut decay_ratio: f64 = 0.0;
    for (j, (i, m)) in [(3, 6), (3, 9), (6, 12)].into_iter().enumerate() {
        let (rate, _) = par_swap_rate(&lm, i, m);
        let spec = SwaptionSpec::new(i, m, rate, Side::Receiver);
        let p7 = price_swaption(&lm, &spec, 7)?.value;
        let p5 = price_swaption(&lm, &spec, 5)?.value;
        let p3 = price_swaption(&lm, &spec, 3)?.value;
        let e = mc_price(&Instrument::Swaption(spec), &lm, &mc(suite.paths(500_000), seed + j as u64))?;
        z_max = z_max.max(e.z_score(p7).abs());
        decay &= (p7 - p5).abs() < (p5 - p3).abs();
        decay_ratio = decay_ratio.max((p7 - p5).abs() / (p5 - p3).abs());
    }
    let mut single: f64 = 0.0;
    for i in [3, 6, 9] {
        let strike = lm.curve().forward_libor(i);
        let s = price_swaption(&lm, &SwaptionSpec::new(i, i + 1, strike, Side::Receiver), 7)?.value;
        let f = crate::caps::price_floorlet(&lm, &CapletSpec::new(i, strike), &cfg)?.value;
        single = single.max(((s - f) / f).abs());
    }
    let ok = z_max <= 3.0 && single <= 5e-4 && decay;
    check(
        ok,
        format!(
            "MC max |z| {z_max:.2} (3), single period vs floorlet {single:.1e} (5e-4), max |p7-p5|/|p5-p3| {decay_ratio:.2e} (< 1)"
        ),
    )
}

fn moments(suite: Suite, seed: u64) -> Outcome {
    let lm = benchmark_model()?;
    let mut z_max: f64 = 0.0;
    let mut n = 0;
    for (j, (i, m)) in [(3, 9), (6, 12)].into_iter().enumerate() {
        let (rate, _) = par_swap_rate(&lm, i, m);
        let spec = SwaptionSpec::new(i, m, rate, Side::Receiver);
        for measure in [i, m] {
            let cfg = mc(suite.paths(200_000), seed + 2 * j as u64 + (measure == m) as u64);
            let est = mc_coupon_bond_moments(&lm, &spec, measure, 4, &cfg)?;
            for (q, e) in est.iter().enumerate() {
                let exact = coupon_bond_moment(&lm, &spec, q + 1, measure)?;
                z_max = z_max.max(e.z_score(exact).abs());
                n += 1;
            }
        }
    }
    check(z_max <= 4.0, format!("{n} moments, max |z| {z_max:.2} (limit 4)"))
}

fn skew(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let d = rng.random_range(1..=3);
        let eye = SymMat::identity(d);
        let sigma = random_psd(&mut rng, d, 1.0).add(&eye.scale(rng.random_range(1e-3..0.5)));
        let b = random_psd(&mut rng, d, 1.0).add(&eye.scale(rng.random_range(1e-3..0.5)));
        let q = loop {
            let q = SquareMat::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            if q.det().abs() > 1e-3 {
                break q;
            }
        };
        let v = skew_from_matrices(&b, &q, &sigma)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let lm = benchmark_model()?;
    let sigma0 = lm.model().sigma0().clone();
    for k in 1..N_TENORS {
        let v = skew_correlation(&lm, k, 0.0, &sigma0)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let mut one: f64 = 0.0;
    for _ in 0..100 {
        let s = |rng: &mut ChaCha8Rng| SymMat::from_diag(&[rng.random_range(1e-3..10.0)]);
        let (b, sg) = (s(&mut rng), s(&mut rng));
        let q = SquareMat::from_diag(&[rng.random_range(1e-3..5.0)]);
        one = one.max((skew_from_matrices(&b, &q, &sg)? - 1.0).abs());
    }
    check(
        lo > 0.0 && hi <= 1.0 && one <= 1e-12,
        format!("range [{lo:.4}, {hi:.4}] (in (0,1]), d = 1 deviation {one:.1e} (1e-12)"),
    )
}

/// Implied vols on the 4m and 32m smiles plus the ATM term structure.
struct Smiles {
    cells: Vec<f64>,
    slope: f64,
}

fn smiles(p: WishartParams) -> Result<Smiles, Box<dyn std::error::Error>> {
    let lm = fitted(AffineModel::Wishart(p))?;
    let cfg = FourierConfig::default();
    let fwd = lm.curve().forward_libor(1);
    let strikes: Vec<f64> = (-4..=4).map(|j| fwd * (1.0 + 0.01 * j as f64)).collect();
    let s = build_caplet_surface(&lm, &strikes, &[1, 8], &cfg)?;
    let cells = s
        .implied_vols
        .iter()
        .flatten()
        .map(|v| v.ok_or("implied vol unavailable"))
        .collect::<Result<Vec<_>, _>>()?;
    let ts = atm_term_structure(&lm, &[1, N_TENORS - 1], &cfg)?;
    let v0 = ts[0].vol.ok_or("ATM vol unavailable")?;
    let v1 = ts[1].vol.ok_or("ATM vol unavailable")?;
    Ok(Smiles { cells, slope: v1 - v0 })
}

/// Fraction of cells where `new` moves strictly in direction `up` relative to `base`.
fn share(base: &Smiles, new: &Smiles, up: bool) -> f64 {
    let hits = base
        .cells
        .iter()
        .zip(&new.cells)
        .filter(|(a, b)| if up { b > a } else { b < a })
        .count();
    hits as f64 / base.cells.len() as f64
}

fn mean_change(base: &Smiles, new: &Smiles) -> f64 {
    base.cells.iter().zip(&new.cells).map(|(a, b)| (b - a) / a).sum::<f64>() / base.cells.len() as f64
}

fn directional() -> Outcome {
    const MIN_SHARE: f64 = 0.9;
    let b = WishartParams::benchmark();
    let base = smiles(b.clone())?;
    let mut parts = Vec::new();
    let mut ok = true;
    let mut record = |label: &str, base: &Smiles, new: &Smiles, up: bool, extra: bool| {
        let sh = share(base, new, up);
        let pass = sh >= MIN_SHARE && extra;
        ok &= pass;
        format!(
            "({label}) {} {:.0}% of cells, mean {:+.2e} {}",
            if up { "up" } else { "down" },
            100.0 * sh,
            mean_change(base, new),
            if pass { "ok" } else { "FAIL" }
        )
    };

    let kappa = smiles(b.with_kappa(2.0 * b.kappa())?)?;
    parts.push(record("a", &base, &kappa, true, true));

    let mut m = b.m().clone();
    m[(0, 0)] *= 1.8;
    let mr = smiles(b.with_m(m)?)?;
    parts.push(record("b", &base, &mr, false, true));

    let mut q = b.q().clone();
    q[(0, 0)] *= 2.0;
    let vv = smiles(b.with_q(q)?)?;
    let steeper = vv.slope > base.slope;
    parts.push(record("c", &base, &vv, true, steeper));
    parts.push(format!("ATM slope {:.2e} -> {:.2e}", base.slope, vv.slope));

    let full = b.with_sigma0(SymMat::from_row_major(2, vec![3.75, 2.0, 2.0, 3.45])?)?;
    let full_base = smiles(full.clone())?;
    for (m12, up) in [(2e-4, true), (-2e-4, false)] {
        let mut m = full.m().clone();
        m[(0, 1)] = m12;
        let new = smiles(full.with_m(m)?)?;
        parts.push(record(if up { "d+" } else { "d-" }, &full_base, &new, up, true));
    }
    check(ok, parts.join("; "))
}

fn jump_transform(suite: Suite, seed: u64) -> Outcome {
    let model = AffineModel::JumpOu(JumpOuParams::reference());
    let points = [
        (0.5, SymMat::from_diag(&[0.1, 0.1])),
        (1.0, SymMat::from_row_major(2, vec![0.3, 0.1, 0.1, 0.2])?),
        (2.0, SymMat::from_diag(&[0.05, 0.5])),
        (3.0, SymMat::from_row_major(2, vec![0.2, -0.15, -0.15, 0.4])?),
        (5.0, SymMat::from_diag(&[0.25, 0.25])),
    ];
    let mut z_max: f64 = 0.0;
    for (j, (t, u)) in points.iter().enumerate() {
        let exact = model.laplace_real(*t, u)?.ok_or("undefined")?;
        let e = mc_laplace(&model, *t, u, &mc(suite.paths(200_000), seed + j as u64))?;
        z_max = z_max.max(e.z_score(exact).abs());
    }
    let at_zero = model.laplace_real(2.0, &SymMat::zeros(2))?.ok_or("undefined")?;
    check(
        z_max <= 3.0 && at_zero == 1.0,
        format!("5 points max |z| {z_max:.2} (limit 3), transform at u = 0: {at_zero}"),
    )
}

fn lyapunov() -> Outcome {
    let p = WishartParams::benchmark();
    let c = p.qtq().scale(p.kappa());
    let s = solve_lyapunov(p.m(), &c)?;
    let resid = (p.m() * s.as_mat() + s.as_mat() * &p.m().transpose() + c.as_mat()).frobenius();
    let mut rel: f64 = 0.0;
    for i in 0..2 {
        let exact = -c[(i, i)] / (2.0 * p.m()[(i, i)]);
        rel = rel.max(((s[(i, i)] - exact) / exact).abs());
    }
    check(
        resid <= 1e-12 && rel <= 1e-14,
        format!("residual {resid:.1e} (1e-12), diagonal closed form {rel:.1e} (1e-14)"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_criteria_pass() {
        for id in [1, 2, 4, 8, 11] {
            let r = run_criterion(id, Suite::Quick, 7);
            assert!(r.passed, "{}", r.line());
        }
    }

}
