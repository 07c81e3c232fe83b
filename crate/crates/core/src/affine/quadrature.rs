use std::sync::OnceLock;

use crate::matcore::Scalar;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on P_n from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gl10() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

pub fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<V> {
    pub value: V,
    pub evaluations: usize,
    pub converged: bool,
}

/// Adaptive Gauss–Legendre on [a, b]: a panel is accepted when the 10-point
/// value agrees with the sum over its two halves to within its share of `tol`.
/// Returns `None` as soon as the integrand does.
pub fn adaptive_gl<V: Scalar>(
    mut f: impl FnMut(f64) -> Option<V>,
    a: f64,
    b: f64,
    tol: f64,
    max_evals: usize,
) -> Option<Integral<V>> {
    let rule = gl10();
    let mut evals = 0usize;
    let mut panel = |lo: f64, hi: f64, evals: &mut usize| -> Option<V> {
        let mut s = V::zero();
        for (x, w) in rule.mapped(lo, hi) {
            s += f(x)? * V::from_f64(w);
        }
        *evals += rule.nodes.len();
        Some(s)
    };

    let len = b - a;
    if len == 0.0 {
        return Some(Integral {
            value: V::zero(),
            evaluations: 0,
            converged: true,
        });
    }
    let whole = panel(a, b, &mut evals)?;
    let mut stack = vec![(a, b, whole)];
    let mut total = V::zero();
    let mut converged = true;
    while let Some((lo, hi, coarse)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(lo, mid, &mut evals)?;
        let right = panel(mid, hi, &mut evals)?;
        let fine = left + right;
        let share = tol * (hi - lo) / len;
        if (fine - coarse).modulus() <= share || hi - lo < 1e-12 * len {
            total += fine;
        } else if evals + 4 * rule.nodes.len() > max_evals {
            converged = false;
            total += fine;
        } else {
            stack.push((mid, hi, right));
            stack.push((lo, mid, left));
        }
    }
    Some(Integral {
        value: total,
        evaluations: evals,
        converged,
    })
}
