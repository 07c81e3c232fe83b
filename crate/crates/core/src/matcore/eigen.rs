use num_complex::Complex64;

use super::mat::{Mat, SquareMat};
use super::sym::SymMat;
use super::MatError;

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns.
pub fn sym_eigen(a: &SymMat) -> (Vec<f64>, SquareMat) {
    let n = a.dim();
    let mut m = a.as_mat().clone();
    let mut v = Mat::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Mat::from_fn(n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Rebuilds V·diag(f(λ))·Vᵀ from a symmetric eigen-decomposition.
pub fn sym_apply(values: &[f64], vectors: &SquareMat, f: impl Fn(f64) -> f64) -> SymMat {
    let n = values.len();
    let fv: Vec<f64> = values.iter().map(|&x| f(x)).collect();
    let out = Mat::from_fn(n, |i, j| {
        (0..n).map(|k| vectors[(i, k)] * fv[k] * vectors[(j, k)]).sum()
    });
    SymMat::from_symmetric_part(&out)
}

/// Eigenvalues of a general complex matrix: Hessenberg reduction followed by
/// Wilkinson-shifted QR sweeps with Givens rotations.
pub fn complex_eigenvalues(a: &Mat<Complex64>) -> Result<Vec<Complex64>, MatError> {
    let n = a.dim();
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let mut h = hessenberg(a);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    let eps = 1e-15;
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    let mut hi = n; // active block is rows/cols [0, hi)
    let mut iter = 0;

    while hi > 0 {
        if hi == 1 {
            values[0] = h[(0, 0)];
            break;
        }
        // Find the start of the trailing unreduced block.
        let mut lo = hi - 1;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if sub <= eps * diag.max(scale * 1e-3) {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            values[hi - 1] = h[(hi - 1, hi - 1)];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > 500 {
            return Err(MatError::NoConvergence);
        }

        // Wilkinson shift from the trailing 2×2 block.
        let a11 = h[(hi - 2, hi - 2)];
        let a12 = h[(hi - 2, hi - 1)];
        let a21 = h[(hi - 1, hi - 2)];
        let a22 = h[(hi - 1, hi - 1)];
        let tr = a11 + a22;
        let det = a11 * a22 - a12 * a21;
        let disc = (tr * tr * 0.25 - det).sqrt();
        let l1 = tr * 0.5 + disc;
        let l2 = tr * 0.5 - disc;
        let mut mu = if (l1 - a22).norm() < (l2 - a22).norm() {
            l1
        } else {
            l2
        };
        if iter % 11 == 0 {
            // Exceptional shift to break cycles.
            mu += Complex64::new(h[(hi - 1, hi - 2)].norm(), 0.0);
        }

        // QR step on the active block H - mu I = QR, H <- RQ + mu I.
        for k in lo..hi {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi - 1 {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = c * x + s * y;
                h[(k + 1, j)] = -s.conj() * x + c * y;
            }
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = lo + idx;
            for i in 0..=(k + 1).min(hi - 1) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
        }
        for k in lo..hi {
            h[(k, k)] += mu;
        }
    }
    Ok(values)
}

/// Rotation with c real, chosen so that [c s; -s̄ c]·[x; y] = [r; 0].
fn givens(x: Complex64, y: Complex64) -> (Complex64, Complex64) {
    let ny = y.norm();
    if ny == 0.0 {
        return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let nx = x.norm();
    if nx == 0.0 {
        return (Complex64::new(0.0, 0.0), y.conj() / ny);
    }
    let r = nx.hypot(ny);
    let phase = x / nx;
    let c = Complex64::new(nx / r, 0.0);
    let s = phase * y.conj() / r;
    (c, s)
}

fn hessenberg(a: &Mat<Complex64>) -> Mat<Complex64> {
    let n = a.dim();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let alpha: f64 = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] += phase * alpha;
        let vnorm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // H <- (I - 2vv*) H (I - 2vv*)
        for j in 0..n {
            let dot: Complex64 = (k + 1..n).map(|i| v[i - k - 1].conj() * h[(i, j)]).sum();
            for i in k + 1..n {
                h[(i, j)] -= v[i - k - 1] * dot * 2.0;
            }
        }
        for i in 0..n {
            let dot: Complex64 = (k + 1..n).map(|j| h[(i, j)] * v[j - k - 1]).sum();
            for j in k + 1..n {
                h[(i, j)] -= dot * v[j - k - 1].conj() * 2.0;
            }
        }
    }
    h
}

/// Eigenvalues of a real (possibly non-symmetric) matrix.
pub fn real_eigenvalues(a: &SquareMat) -> Result<Vec<Complex64>, MatError> {
    complex_eigenvalues(&a.to_complex())
}
