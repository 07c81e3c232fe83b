use proptest::prelude::*;
use wishart_libor::affine::*;
use wishart_libor::libor::*;
use wishart_libor::matcore::*;

fn bench_model() -> LiborModel {
    let curve = TenorCurve::flat(1.0 / 3.0, 12, 0.05).unwrap();
    LiborModel::fit(
        AffineModel::Wishart(WishartParams::benchmark()),
        curve,
        None,
        &FitOptions::default(),
    )
    .unwrap()
}

fn arb_spd2() -> impl Strategy<Value = SymMat> {
    (0.01..10.0f64, 0.01..10.0f64, -0.99..0.99f64)
        .prop_map(|(a, c, r)| SymMat::from_row_major(2, vec![a, r * (a * c).sqrt(), r * (a * c).sqrt(), c]).unwrap())
}

#[test]
fn curve_construction() {
    let c = TenorCurve::flat(0.25, 4, 0.04).unwrap();
    assert_eq!(c.ratio(4), 1.0);
    assert!((c.ratio(1) - 1.01f64.powi(3)).abs() < 1e-15);
    assert!((c.bond(1) - 1.0 / 1.01).abs() < 1e-15);
    assert!((c.forward_libor(2) - 0.04).abs() < 1e-14);
    // Ratios that fail to decrease are rejected.
    assert!(TenorCurve::from_ratios(0.25, vec![1.0 + 1e-9, 1.0 + 1e-9, 1.0], 0.9).is_err());
    assert!(TenorCurve::from_ratios(0.25, vec![1.02, 1.01, 1.001], 0.9).is_err());
    assert!(TenorCurve::from_libors(0.25, &[0.01, -0.02]).is_err());
}

#[test]
fn flat_curve_fit() {
    let m = bench_model();
    let xis = m.family().xis();
    assert_eq!(xis.len(), 12);
    assert_eq!(xis[11], 0.0);
    assert!(xis.windows(2).all(|w| w[0] > w[1]));
    for k in 1..12 {
        let f = m.martingale_value(0.0, k, m.model().sigma0()).unwrap();
        assert!((f - m.curve().ratio(k)).abs() / m.curve().ratio(k) <= 1e-12);
    }
}

#[test]
fn two_date_curve() {
    let model = AffineModel::Wishart(WishartParams::benchmark());
    let curve = TenorCurve::from_ratios(0.5, vec![1.03, 1.0], 0.95).unwrap();
    let fam = fit_term_structure(&model, &curve, None, &FitOptions::default()).unwrap();
    let u = fam.u(1).to_complex();
    let v = model.laplace(1.0, &u).unwrap().unwrap();
    assert!((v.re - 1.03).abs() < 1e-12 * 1.03);
}

#[test]
fn explicit_direction_checks() {
    let model = AffineModel::Wishart(WishartParams::benchmark());
    let curve = TenorCurve::flat(1.0 / 3.0, 12, 0.05).unwrap();
    let tiny = SymMat::identity(2).scale(-1e-4);
    assert!(matches!(
        fit_term_structure(&model, &curve, Some(&tiny), &FitOptions::default()),
        Err(LiborError::InsufficientMass { .. })
    ));
    let pos = SymMat::identity(2);
    assert!(matches!(
        fit_term_structure(&model, &curve, Some(&pos), &FitOptions::default()),
        Err(LiborError::NotNegativeDefinite)
    ));
}

#[test]
fn refit_is_idempotent() {
    let m = bench_model();
    let again = fit_term_structure(m.model(), m.curve(), Some(m.family().base_direction()), &FitOptions::default()).unwrap();
    for (a, b) in m.family().xis().iter().zip(again.xis()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn martingale_endpoints() {
    let m = bench_model();
    let s = SymMat::from_row_major(2, vec![2.0, 0.3, 0.3, 4.0]).unwrap();
    assert_eq!(m.martingale_value(1.0, 12, &s).unwrap(), 1.0);
    let t = m.curve().horizon();
    for k in 1..12 {
        let v = m.martingale_value(t, k, &s).unwrap();
        let expected = (-m.family().u(k).trace_prod(&s)).exp();
        assert!((v - expected).abs() < 1e-13 * expected);
        assert!(v > 1.0);
    }
    assert!(matches!(m.martingale_value(5.0, 1, &s), Err(LiborError::InvalidTime { .. })));
    assert!(matches!(m.martingale_value(1.0, 13, &s), Err(LiborError::InvalidIndex { .. })));
}

#[test]
fn forward_coefficients() {
    let m = bench_model();
    let s0 = m.model().sigma0();
    let fc = m.forward_coeffs(1, 0.0).unwrap();
    let fwd = (fc.a + fc.b.trace_prod(s0)).exp();
    assert!((fwd - m.curve().ratio(1) / m.curve().ratio(2)).abs() < 1e-12);
    for k in 1..12 {
        let fc = m.forward_coeffs(k, 0.0).unwrap();
        assert!(min_eigenvalue(&fc.b) > 0.0);
        let l = m.libor_rate(k, 0.0, s0).unwrap();
        assert!((l - m.curve().forward_libor(k)).abs() < 1e-10);
    }
    // At t with T_N - t = 0 the forward loads u_{k+1} - u_k exactly.
    let short = TenorCurve::flat(0.5, 2, 0.03).unwrap();
    let sm = LiborModel::fit(m.model().clone(), short, None, &FitOptions::default()).unwrap();
    let fam = sm.family();
    let direct = ForwardCoeffs { a: 0.0, b: fam.u(2).sub(fam.u(1)), k: 1, t: 1.0 };
    let fc = sm.forward_coeffs(1, 1.0).unwrap();
    assert!(fc.a.abs() < 1e-15);
    assert!((fc.b.as_mat() - direct.b.as_mat()).frobenius() < 1e-15);
}

#[test]
fn degenerate_equal_xis_give_unit_forward() {
    let m = bench_model();
    let base = m.family().base_direction().clone();
    let fam = MartingaleFamily::from_xis(base, vec![0.4, 0.4, 0.0], 1.0);
    let curve = TenorCurve::flat(1.0 / 3.0, 3, 0.05).unwrap();
    let lm = LiborModel::from_parts(m.model().clone(), curve, fam);
    let fc = lm.forward_coeffs(1, 0.0).unwrap();
    assert_eq!(fc.a, 0.0);
    assert_eq!(fc.b.frobenius(), 0.0);
    assert_eq!(lm.libor_rate(1, 0.0, lm.model().sigma0()).unwrap(), 0.0);
}

#[test]
fn radon_nikodym_basics() {
    let m = bench_model();
    let s0 = m.model().sigma0();
    for k in 1..=12 {
        assert!((m.radon_nikodym(k, 0.0, s0).unwrap() - 1.0).abs() < 1e-14);
    }
    let s = SymMat::identity(2).scale(7.0);
    assert_eq!(m.radon_nikodym(12, 2.0, &s).unwrap(), 1.0);
    assert!(m.radon_nikodym(3, 2.0, &s).unwrap() > 0.0);
}

#[test]
fn telescoping_product() {
    let m = bench_model();
    let s = SymMat::from_row_major(2, vec![3.0, -0.4, -0.4, 2.5]).unwrap();
    let t = 1.5;
    let vals: Vec<f64> = (1..=12).map(|k| m.martingale_value(t, k, &s).unwrap()).collect();
    for k in 1..12 {
        let prod: f64 = (k..12).map(|l| vals[l - 1] / vals[l]).product();
        assert!((prod - vals[k - 1]).abs() <= 1e-12 * vals[k - 1]);
    }
}

#[test]
fn jump_model_fits() {
    let model = AffineModel::JumpOu(JumpOuParams::reference());
    let curve = TenorCurve::flat(0.5, 6, 0.03).unwrap();
    let lm = LiborModel::fit(model, curve, None, &FitOptions::default()).unwrap();
    assert!(lm.family().residuals().iter().all(|&r| r <= 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn libor_rates_positive(s in arb_spd2(), k in 1usize..12, frac in 0.0..1.0f64) {
        let m = bench_model_cached();
        let t = frac * m.maturity(k);
        prop_assert!(m.libor_rate(k, t, &s).unwrap() > 0.0);
    }
}

fn bench_model_cached() -> &'static LiborModel {
    static M: std::sync::OnceLock<LiborModel> = std::sync::OnceLock::new();
    M.get_or_init(bench_model)
}
