use super::mat::{Mat, SquareMat};
use super::scalar::RealScalar;
use super::MatError;

const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

fn pade_coeffs(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[
            17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
        ],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        _ => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
    }
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant
/// of degree 3, 5, 7, 9 or 13.
pub fn expm(a: &SquareMat) -> Result<SquareMat, MatError> {
    if !a.is_finite() {
        return Err(MatError::NonFinite);
    }
    let n = a.dim();
    let norm = a.norm1();
    if norm == 0.0 {
        return Ok(Mat::identity(n));
    }

    for &(m, theta) in &THETA[..4] {
        if norm <= theta {
            return finish(pade(a, m), 0);
        }
    }

    let theta13 = THETA[4].1;
    let s = ((norm / theta13).log2().ceil()).max(0.0) as i32;
    if s > 1000 {
        return Err(MatError::Overflow);
    }
    let scaled = a.scale(2f64.powi(-s));
    finish(pade(&scaled, 13), s as u32)
}

fn finish(mut r: SquareMat, squarings: u32) -> Result<SquareMat, MatError> {
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.is_finite() {
        Ok(r)
    } else {
        Err(MatError::Overflow)
    }
}

fn pade(a: &SquareMat, m: usize) -> SquareMat {
    let n = a.dim();
    let b = pade_coeffs(m);
    let id = Mat::identity(n);
    let a2 = a * a;

    let (u, v) = if m == 13 {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let u_inner = &a6 * (a6.scale(b[13]) + a4.scale(b[11]) + a2.scale(b[9]))
            + a6.scale(b[7])
            + a4.scale(b[5])
            + a2.scale(b[3])
            + id.scale(b[1]);
        let u = a * &u_inner;
        let v = &a6 * (a6.scale(b[12]) + a4.scale(b[10]) + a2.scale(b[8]))
            + a6.scale(b[6])
            + a4.scale(b[4])
            + a2.scale(b[2])
            + id.scale(b[0]);
        (u, v)
    } else {
        // Powers A^0, A^2, A^4, ... up to A^{m-1}.
        let mut pows = vec![id.clone(), a2.clone()];
        while pows.len() < m.div_ceil(2) {
            let next = pows.last().unwrap() * &a2;
            pows.push(next);
        }
        let mut u_inner = Mat::zeros(n);
        let mut v = Mat::zeros(n);
        for (k, p) in pows.iter().enumerate() {
            u_inner = u_inner + p.scale(b[2 * k + 1]);
            v = v + p.scale(b[2 * k]);
        }
        (a * &u_inner, v)
    };

    let p = &v + &u;
    let q = &v - &u;
    q.solve(&p).expect("Padé denominator is well conditioned for the chosen degree")
}

/// Matrix exponential by scaled Taylor series, in any real precision.
///
/// Used where the working precision exceeds f64 and Padé coefficients would
/// need re-deriving; the scaling keeps the series argument below 1/8.
pub fn expm_taylor<R: RealScalar>(a: &Mat<R>) -> Mat<R> {
    let n = a.dim();
    let norm = a.norm1();
    let s = if norm > 0.125 {
        (norm / 0.125).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(R::from_f64(2f64.powi(-s)));
    let mut result = Mat::identity(n);
    let mut term = Mat::identity(n);
    for k in 1..80 {
        term = (&term * &scaled).scale(R::one() / R::from_f64(k as f64));
        result = &result + &term;
        if term.norm1() < 1e-36 {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}
