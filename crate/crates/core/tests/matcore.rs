use num_complex::Complex64;
use proptest::prelude::*;
use qd::Quad;
use wishart_libor::matcore::*;

fn mat(n: usize, v: &[f64]) -> SquareMat {
    Mat::from_row_major(n, v.to_vec()).unwrap()
}

fn taylor_exp(a: &SquareMat, terms: usize) -> SquareMat {
    let n = a.dim();
    let mut out = Mat::identity(n);
    let mut term = Mat::identity(n);
    for k in 1..=terms {
        term = (&term * a).scale(1.0 / k as f64);
        out = out + &term;
    }
    out
}

fn rel_err(a: &SquareMat, b: &SquareMat) -> f64 {
    (a - b).frobenius() / b.frobenius()
}

fn arb_matrix(n: usize, bound: f64) -> impl Strategy<Value = SquareMat> {
    prop::collection::vec(-bound..bound, n * n).prop_map(move |v| mat(n, &v))
}

fn arb_spd(n: usize) -> impl Strategy<Value = SymMat> {
    arb_matrix(n, 1.0).prop_map(move |a| {
        let s = &a * a.transpose() + Mat::identity(n).scale(0.05);
        SymMat::from_symmetric_part(&s)
    })
}

fn arb_stable(n: usize) -> impl Strategy<Value = SquareMat> {
    (arb_matrix(n, 1.0), arb_matrix(n, 1.0)).prop_map(move |(a, b)| {
        let sym = &a * a.transpose() + Mat::identity(n).scale(0.1);
        let skew = &b - b.transpose();
        skew - sym
    })
}

#[test]
fn spd_membership() {
    assert!(is_spd(&SymMat::identity(2), 0.0));
    assert!(!is_spd(&SymMat::from_diag(&[1.0, -1.0]), 0.0));
    assert!(is_spd(&SymMat::from_diag(&[3.75, 3.45]), 0.0));
}

#[test]
fn expm_simple_cases() {
    let z = expm(&Mat::zeros(2)).unwrap();
    assert_eq!(z, Mat::identity(2));
    let d = expm(&Mat::from_diag(&[2f64.ln(), 3f64.ln()])).unwrap();
    assert!((d[(0, 0)] - 2.0).abs() < 1e-14);
    assert!((d[(1, 1)] - 3.0).abs() < 1e-14);
    assert_eq!(d[(0, 1)], 0.0);
}

#[test]
fn expm_overflow_is_reported() {
    let a = Mat::from_diag(&[1000.0, 1.0]);
    assert_eq!(expm(&a), Err(MatError::Overflow));
}

#[test]
fn expm_large_norm_against_eigenbasis() {
    // A = V D V^{-1} with known spectrum, ‖A‖ up to about 10.
    let v = mat(3, &[1.0, 0.3, -0.2, 0.1, 1.0, 0.4, -0.3, 0.2, 1.0]);
    let vinv = v.inverse().unwrap();
    for scale in [0.5, 2.0, 4.0] {
        let d = [-1.3 * scale, 0.4 * scale, 1.1 * scale];
        let a = &v * Mat::from_diag(&d) * &vinv;
        let ed: Vec<f64> = d.iter().map(|x| x.exp()).collect();
        let expected = &v * Mat::from_diag(&ed) * &vinv;
        assert!(rel_err(&expm(&a).unwrap(), &expected) < 1e-12, "scale {scale}");
    }
}

#[test]
fn expm_taylor_quad_agrees_with_pade() {
    let a = mat(2, &[-0.3, 0.8, 0.2, 0.1]);
    let q: Mat<Quad> = a.map(Quad::from_f64);
    let eq = expm_taylor(&q).map(|x| x.0 + x.1);
    assert!(rel_err(&eq, &expm(&a).unwrap()) < 1e-15);
}

#[test]
fn lyapunov_diagonal_and_identity() {
    let x = solve_lyapunov(&Mat::identity(2).scale(-1.0), &SymMat::identity(2).scale(2.0)).unwrap();
    assert!((x.as_mat() - &Mat::identity(2)).frobenius() < 1e-15);

    let (m1, m2, q1, q2, kappa) = (-0.3125e-3, -0.5e-3, 0.034, 0.042, 3.0);
    let m = Mat::from_diag(&[m1, m2]);
    let c = SymMat::from_diag(&[kappa * q1 * q1, kappa * q2 * q2]);
    let x = solve_lyapunov(&m, &c).unwrap();
    let e11 = -kappa * q1 * q1 / (2.0 * m1);
    let e22 = -kappa * q2 * q2 / (2.0 * m2);
    assert!(((x[(0, 0)] - e11) / e11).abs() < 1e-14);
    assert!(((x[(1, 1)] - e22) / e22).abs() < 1e-14);
    assert_eq!(x[(0, 1)], 0.0);
}

#[test]
fn lyapunov_rejects_unstable() {
    let m = Mat::from_diag(&[-1.0, 0.0]);
    assert!(matches!(
        solve_lyapunov(&m, &SymMat::identity(2)),
        Err(MatError::Unstable(_))
    ));
}

#[test]
fn sqrtm_simple_cases() {
    let s = sqrtm_spd(&SymMat::from_diag(&[4.0, 9.0])).unwrap();
    assert!((s[(0, 0)] - 2.0).abs() < 1e-15 && (s[(1, 1)] - 3.0).abs() < 1e-15);
    assert!(matches!(
        sqrtm_spd(&SymMat::from_diag(&[1.0, -2.0])),
        Err(MatError::NotSpd(_))
    ));
}

#[test]
fn logdet_examples() {
    let id = Mat::<Complex64>::identity(2);
    let (l, p) = logdet_tracked(&id, 0.0).unwrap();
    assert_eq!((l, p), (Complex64::new(0.0, 0.0), 0.0));

    let e = Mat::<Complex64>::identity(2).scale(Complex64::new(std::f64::consts::E, 0.0));
    let (l, _) = logdet_tracked(&e, 0.0).unwrap();
    assert!((l - Complex64::new(2.0, 0.0)).norm() < 1e-15);

    let mut phase = 0.0;
    let mut last = Complex64::new(0.0, 0.0);
    for step in 0..=100 {
        let t = step as f64 / 100.0;
        let a = Mat::<Complex64>::identity(2).scale(Complex64::from_polar(1.0, std::f64::consts::PI * t));
        let (l, p) = logdet_tracked(&a, phase).unwrap();
        phase = p;
        last = l;
    }
    assert!((last.im - 2.0 * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn logdet_singular() {
    let a = Mat::<Complex64>::zeros(2);
    assert_eq!(logdet_tracked(&a, 0.0), Err(MatError::Singular));
}

#[test]
fn complex_eigenvalues_of_triangular_and_rotation() {
    let a = mat(3, &[1.0, 2.0, 3.0, 0.0, -4.0, 5.0, 0.0, 0.0, 0.5]);
    let mut ev: Vec<f64> = real_eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] + 4.0).abs() < 1e-12 && (ev[1] - 0.5).abs() < 1e-12 && (ev[2] - 1.0).abs() < 1e-12);

    let r = mat(2, &[0.0, -2.0, 2.0, 0.0]);
    let mut ev = real_eigenvalues(&r).unwrap();
    ev.sort_by(|a, b| a.im.total_cmp(&b.im));
    assert!((ev[0] - Complex64::new(0.0, -2.0)).norm() < 1e-12);
    assert!((ev[1] - Complex64::new(0.0, 2.0)).norm() < 1e-12);
}

proptest! {
    #[test]
    fn expm_matches_taylor(a in arb_matrix(4, 0.25)) {
        prop_assume!(a.norm1() <= 1.0);
        let e = expm(&a).unwrap();
        prop_assert!(rel_err(&e, &taylor_exp(&a, 30)) < 1e-12);
    }

    #[test]
    fn expm_of_symmetric_is_symmetric(s in arb_spd(3), scale in -2.0..2.0f64) {
        let e = expm(&s.as_mat().scale(scale)).unwrap();
        prop_assert!(e.max_asymmetry() <= 1e-13 * e.frobenius());
    }

    #[test]
    fn sqrtm_squares_back(a in (1usize..=4).prop_flat_map(arb_spd)) {
        let s = sqrtm_spd(&a).unwrap();
        let back = s.as_mat() * s.as_mat();
        prop_assert!((&back - a.as_mat()).frobenius() <= 1e-12 * a.frobenius());
        prop_assert!(is_spd(&s, 0.0));
    }

    #[test]
    fn lyapunov_residual(m in arb_stable(3), c in arb_spd(3)) {
        let x = solve_lyapunov(&m, &c).unwrap();
        let r = &m * x.as_mat() + x.as_mat() * m.transpose() + c.as_mat();
        prop_assert!(r.frobenius() <= 1e-12 * c.frobenius());
    }

    #[test]
    fn logdet_agrees_with_eigenvalue_logs(re in arb_matrix(3, 1.0), im in arb_matrix(3, 1.0)) {
        let a = Mat::from_fn(3, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
        prop_assume!(a.det().norm() > 1e-6);
        let (l, _) = logdet_tracked(&a, 0.0).unwrap();
        let p = logdet_principal(&a).unwrap();
        prop_assert!((l.re - p.re).abs() < 1e-10);
        let k = (l.im - p.im) / (2.0 * std::f64::consts::PI);
        prop_assert!((k - k.round()).abs() < 1e-10);
    }

    #[test]
    fn logdet_continuous_along_path(b in arb_spd(2), t_max in 1.0..30.0f64) {
        // a(t) = I + i t B: the det phase moves smoothly, steps stay well below π.
        let mut phase = 0.0;
        let mut prev: Option<Complex64> = None;
        for step in 0..=400 {
            let t = t_max * step as f64 / 400.0;
            let a = Mat::from_fn(2, |i, j| {
                let id = if i == j { 1.0 } else { 0.0 };
                Complex64::new(id, t * b[(i, j)])
            });
            let (l, p) = logdet_tracked(&a, phase).unwrap();
            if let Some(q) = prev {
                prop_assert!((l.im - q.im).abs() < 0.5);
            }
            phase = p;
            prev = Some(l);
        }
        // End point agrees with the principal branch sum (each eigen-phase stays in (-π/2, π/2)).
        let a = Mat::from_fn(2, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            Complex64::new(id, t_max * b[(i, j)])
        });
        prop_assert!((prev.unwrap() - logdet_principal(&a).unwrap()).norm() < 1e-9);
    }
}
