use num_complex::Complex64;
use proptest::prelude::*;
use qd::Quad;
use wishart_libor::affine::{AffineModel, WishartParams};
use wishart_libor::caps::{CapletCf, CapletGrid, FourierConfig, PricingError};
use wishart_libor::libor::{FitOptions, LiborModel, TenorCurve};
use wishart_libor::swaptions::*;

fn benchmark() -> LiborModel {
    let curve = TenorCurve::flat(1.0 / 3.0, 12, 0.05).unwrap();
    LiborModel::fit(
        AffineModel::Wishart(WishartParams::benchmark()),
        curve,
        None,
        &FitOptions::default(),
    )
    .unwrap()
}

fn par_rate(lm: &LiborModel, i: usize, m: usize) -> f64 {
    let c = lm.curve();
    let annuity: f64 = (i + 1..=m).map(|k| c.bond(k)).sum::<f64>() * c.delta_t();
    (c.bond(i) - c.bond(m)) / annuity
}

#[test]
fn point_mass_cumulants() {
    let a: f64 = 1.3;
    let moments: Vec<f64> = (1..=6).map(|q| a.powi(q)).collect();
    let k = cumulants_from_moments(&moments);
    assert!((k[0] - a).abs() < 1e-15);
    for x in &k[1..] {
        assert!(x.abs() < 1e-12, "{k:?}");
    }
    assert!(matches!(
        moments_to_cumulants(&moments, 0),
        Err(PricingError::DegenerateDistribution(_))
    ));
}

#[test]
fn gaussian_cumulants() {
    let (mu, s2) = (0.7, 0.3);
    // E[X^n] = mu E[X^{n-1}] + (n-1) s2 E[X^{n-2}]
    let mut m = vec![1.0, mu];
    for n in 2..=7 {
        let next = mu * m[n - 1] + (n - 1) as f64 * s2 * m[n - 2];
        m.push(next);
    }
    let cs = moments_to_cumulants(&m[1..], 0).unwrap();
    assert!((cs.mean() - mu).abs() < 1e-14);
    assert!((cs.variance() - s2).abs() < 1e-14);
    for x in &cs.cumulants[2..] {
        assert!(x.abs() < 1e-12);
    }
}

/// Cumulants as Taylor coefficients of log E[e^{tX}], by power-series log.
fn series_cumulants(points: &[(f64, f64)], order: usize) -> Vec<f64> {
    // a_n = E[X^n]/n!
    let mut fact = 1.0;
    let mut a = vec![1.0];
    for n in 1..=order {
        fact *= n as f64;
        a.push(points.iter().map(|(p, x)| p * x.powi(n as i32)).sum::<f64>() / fact);
    }
    // b = log(a): b_n = a_n - (1/n) Σ_{k=1}^{n-1} k b_k a_{n-k}
    let mut b = vec![0.0; order + 1];
    for n in 1..=order {
        let mut s = a[n];
        for k in 1..n {
            s -= k as f64 * b[k] * a[n - k] / n as f64;
        }
        b[n] = s;
    }
    let mut fact = 1.0;
    (1..=order)
        .map(|n| {
            fact *= n as f64;
            b[n] * fact
        })
        .collect()
}

proptest! {
    #[test]
    fn discrete_cumulants_match_log_mgf(
        xs in prop::collection::vec(-2.0f64..2.0, 5),
        ws in prop::collection::vec(0.05f64..1.0, 5),
    ) {
        let total: f64 = ws.iter().sum();
        let pts: Vec<(f64, f64)> = ws.iter().zip(&xs).map(|(w, x)| (w / total, *x)).collect();
        let moments: Vec<f64> = (1..=6)
            .map(|q| pts.iter().map(|(p, x)| p * x.powi(q)).sum())
            .collect();
        let k = cumulants_from_moments(&moments);
        let reference = series_cumulants(&pts, 6);
        for (a, b) in k.iter().zip(&reference) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{k:?} vs {reference:?}");
        }
    }
}

#[test]
fn edgeworth_gaussian_base_and_limits() {
    let cs = CumulantSet {
        order: 7,
        cumulants: vec![1.0, 0.04, 0.0, 0.0, 0.0, 0.0, 0.0],
        measure: 0,
    };
    for t in [0.6, 0.9, 1.0, 1.25] {
        let z = (t - 1.0) / 0.2;
        let expected = 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
        let p = edgeworth_tail(&cs, t).unwrap();
        assert!((p.value - expected).abs() < 1e-15);
    }
    assert_eq!(edgeworth_tail(&cs, f64::NEG_INFINITY).unwrap().value, 1.0);
    assert_eq!(edgeworth_tail(&cs, f64::INFINITY).unwrap().value, 0.0);
    let skewed = CumulantSet {
        cumulants: vec![0.0, 1.0, 0.5, 0.3, 0.1, 0.05, 0.02],
        ..cs
    };
    assert!(edgeworth_tail(&skewed, -40.0).unwrap().value > 1.0 - 1e-12);
    assert!(edgeworth_tail(&skewed, 40.0).unwrap().value < 1e-12);
}

#[test]
fn edgeworth_low_order_coefficients() {
    let (l3, l4) = (0.3, 0.2);
    let c = edgeworth_coefficients(&[l3, l4]);
    assert!((c[0] - 1.0).abs() < 1e-15);
    assert!(c[1].abs() < 1e-15 && c[2].abs() < 1e-15);
    assert!((c[3] - l3 / 6.0).abs() < 1e-15);
    assert!((c[4] - l4 / 24.0).abs() < 1e-15);
    assert!(c[5].abs() < 1e-15);
    assert!((c[6] - l3 * l3 / 72.0).abs() < 1e-15);
}

#[test]
fn edgeworth_lognormal_tail() {
    let (mu, sigma) = (0.0, 0.1);
    let moments: Vec<Quad> = (1..=7)
        .map(|n| {
            let n = n as f64;
            Quad::from(n * mu) + Quad::from(0.5 * n * n * sigma * sigma)
        })
        .map(|e: Quad| e.exp())
        .collect();
    let kappa = cumulants_from_moments(&moments);
    let cs = CumulantSet {
        order: 7,
        cumulants: kappa.iter().map(|k| k.0 + k.1).collect(),
        measure: 0,
    };
    let sd = cs.variance().sqrt();
    for j in 0..=40 {
        let z = -2.0 + 0.1 * j as f64;
        let x = cs.mean() + z * sd;
        let exact = 0.5 * libm::erfc((x.ln() - mu) / sigma / std::f64::consts::SQRT_2);
        let approx = edgeworth_tail(&cs, x).unwrap().value;
        assert!((approx - exact).abs() < 2e-4, "z = {z}: {approx} vs {exact}");
    }
}

/// All (m-i)^q coupon sequences with f64 transforms, no multiset collapse.
fn brute_force_moment(lm: &LiborModel, spec: &SwaptionSpec, q: usize, measure: usize) -> f64 {
    let model = lm.model();
    let fam = lm.family();
    let t_n = lm.curve().horizon();
    let t_i = lm.maturity(spec.i);
    let rest = model.horizon(t_n - t_i).unwrap();
    let coeff = |k: usize| rest.real(fam.u(k)).unwrap();
    let ci = coeff(spec.i);
    let ck = coeff(measure);
    let start = model.real_coeffs(t_n, fam.u(measure)).unwrap().unwrap();
    let log_rn0 = start.phi + start.psi.trace_prod(model.sigma0());
    let coupons = spec.coupons(lm.delta_t());
    let n = coupons.len();
    let mut total = 0.0;
    for code in 0..n.pow(q as u32) {
        let mut c = code;
        let mut weight = 1.0;
        let mut phi = 0.0;
        let mut arg = ck.psi.sub(&ci.psi.scale(q as f64));
        for _ in 0..q {
            let (k, ck_) = coupons[c % n];
            c /= n;
            let cc = coeff(k);
            weight *= ck_;
            phi += cc.phi;
            arg = arg.add(&cc.psi);
        }
        let lap = model.laplace_real(t_i, &arg).unwrap().unwrap();
        total += weight * (-phi + q as f64 * ci.phi - ck.phi + log_rn0).exp() * lap;
    }
    total
}

#[test]
fn moments_match_brute_force_enumeration() {
    let lm = benchmark();
    let spec = SwaptionSpec::new(3, 7, 0.045, Side::Receiver);
    for measure in [3, 5, 7] {
        for q in 1..=3 {
            let a = coupon_bond_moment(&lm, &spec, q, measure).unwrap();
            let b = brute_force_moment(&lm, &spec, q, measure);
            assert!(((a - b) / b).abs() < 1e-12, "q = {q}, k = {measure}: {a} vs {b}");
        }
    }
    assert_eq!(coupon_bond_moment(&lm, &spec, 0, 4).unwrap(), 1.0);
}

#[test]
fn first_moment_under_expiry_measure_is_forward_coupon_bond() {
    let lm = benchmark();
    let c = lm.curve();
    let spec = SwaptionSpec::new(4, 10, 0.05, Side::Receiver);
    let forward: f64 = spec
        .coupons(lm.delta_t())
        .iter()
        .map(|&(k, ck)| ck * c.bond(k) / c.bond(4))
        .sum();
    let m1 = coupon_bond_moment(&lm, &spec, 1, 4).unwrap();
    assert!(((m1 - forward) / forward).abs() < 1e-10);
}

#[test]
fn single_coupon_moments_match_forward_transform() {
    let lm = benchmark();
    let i = 5;
    let spec = SwaptionSpec::new(i, i + 1, 0.05, Side::Receiver);
    let cm = 1.0 + lm.delta_t() * 0.05;
    // B(T_i,T_{i+1})^q = exp(-qY) with Y the caplet log-forward
    let cf = CapletCf::new(&lm, i).unwrap();
    for q in 1..=4 {
        let (val, _) = cf.eval(Complex64::new(-(q as f64), 0.0), 0.0).unwrap();
        let expected = cm.powi(q as i32) * val.re;
        let got = coupon_bond_moment(&lm, &spec, q, i + 1).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-12, "q = {q}");
    }
}

#[test]
fn expansion_corrections_decay() {
    let lm = benchmark();
    for (i, m) in [(3, 6), (3, 9), (6, 12), (2, 3), (8, 12)] {
        let spec = SwaptionSpec::new(i, m, par_rate(&lm, i, m), Side::Receiver);
        let p3 = price_swaption(&lm, &spec, 3).unwrap().value;
        let p5 = price_swaption(&lm, &spec, 5).unwrap().value;
        let p7 = price_swaption(&lm, &spec, 7).unwrap().value;
        assert!((p7 - p5).abs() <= (p5 - p3).abs(), "{i}x{m}: {p3} {p5} {p7}");
    }
}

#[test]
fn single_period_swaption_matches_floorlet() {
    let lm = benchmark();
    for i in [1, 4, 8, 11] {
        let strike = par_rate(&lm, i, i + 1);
        for k in [strike * 0.97, strike, strike * 1.03] {
            let spec = SwaptionSpec::new(i, i + 1, k, Side::Receiver);
            let s = price_swaption(&lm, &spec, 7).unwrap().value;
            let f = CapletGrid::build(&lm, i, &FourierConfig::default())
                .unwrap()
                .floorlet(k)
                .value;
            assert!(((s - f) / f).abs() < 5e-4, "i = {i}, K = {k}: {s} vs {f}");
        }
    }
}

#[test]
fn payer_receiver_parity() {
    let lm = benchmark();
    let k = par_rate(&lm, 3, 9) * 1.02;
    let rec = price_swaption(&lm, &SwaptionSpec::new(3, 9, k, Side::Receiver), 7).unwrap();
    let pay = price_swaption(&lm, &SwaptionSpec::new(3, 9, k, Side::Payer), 7).unwrap();
    let swap = SwaptionSpec::new(3, 9, k, Side::Receiver).swap_value(&lm);
    assert!((rec.value - pay.value - swap).abs() < 1e-14);
}

#[test]
fn receiver_nondecreasing_in_strike() {
    let lm = benchmark();
    let s0 = par_rate(&lm, 3, 6);
    let mut last = 0.0;
    for j in 0..30 {
        let k = s0 * (0.9 + 0.007 * j as f64);
        let p = price_swaption(&lm, &SwaptionSpec::new(3, 6, k, Side::Receiver), 7)
            .unwrap()
            .value;
        assert!(p >= last - 1e-14, "K = {k}");
        last = p;
    }
}

#[test]
fn deep_itm_receiver_is_swap_value() {
    let lm = benchmark();
    let spec = SwaptionSpec::new(2, 8, 0.2, Side::Receiver);
    let b = swaption_breakdown(&lm, &spec, 7).unwrap();
    for (_, p) in &b.exercise_probabilities {
        assert!(p.value > 1.0 - 1e-14);
    }
    let p = price_swaption(&lm, &spec, 7).unwrap().value;
    assert!((p - spec.swap_value(&lm)).abs() < 1e-12);
}

#[test]
fn zero_strike_receiver_vanishes() {
    let lm = benchmark();
    let p = price_swaption(&lm, &SwaptionSpec::new(3, 9, 0.0, Side::Receiver), 7)
        .unwrap()
        .value;
    assert!(p < 1e-10, "{p}");
}

#[test]
fn invalid_specs_rejected() {
    let lm = benchmark();
    for (i, m) in [(0, 3), (3, 3), (5, 4), (3, 13)] {
        assert!(matches!(
            price_swaption(&lm, &SwaptionSpec::new(i, m, 0.05, Side::Receiver), 7),
            Err(PricingError::InvalidSpec(_))
        ));
    }
    for order in [2, 8] {
        assert!(price_swaption(&lm, &SwaptionSpec::new(2, 5, 0.05, Side::Receiver), order).is_err());
    }
}
