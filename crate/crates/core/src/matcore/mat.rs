use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use super::scalar::{RealScalar, Scalar};
use super::MatError;

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    n: usize,
    data: Vec<T>,
}

/// General real square matrix (M, Q and intermediate products).
pub type SquareMat = Mat<f64>;

impl<T: Scalar> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds from row-major entries; `data.len()` must be `n * n`.
    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self, MatError> {
        if n == 0 {
            return Err(MatError::EmptyDimension);
        }
        if data.len() != n * n {
            return Err(MatError::Shape {
                expected: n * n,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(MatError::NonFinite);
        }
        Ok(Mat { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Mat { n, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat {
            n: self.n,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            s += self[(i, i)];
        }
        s
    }

    pub fn scale(&self, a: T) -> Self {
        Mat {
            n: self.n,
            data: self.data.iter().map(|&x| x * a).collect(),
        }
    }

    /// tr[self · other] without forming the product.
    pub fn trace_prod(&self, other: &Self) -> T {
        let n = self.n;
        let mut s = T::zero();
        for i in 0..n {
            for k in 0..n {
                s += self[(i, k)] * other[(k, i)];
            }
        }
        s
    }

    pub fn frobenius(&self) -> f64 {
        self.data
            .iter()
            .map(|x| {
                let m = x.modulus();
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Induced 1-norm (max column sum), in f64.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// (A + Aᵀ)/2.
    pub fn symmetrized(&self) -> Self {
        let half = T::from_f64(0.5);
        Self::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).modulus());
            }
        }
        worst
    }

    /// Sub-block of size `k` starting at (`r`, `c`).
    pub fn block(&self, r: usize, c: usize, k: usize) -> Self {
        Self::from_fn(k, |i, j| self[(r + i, c + j)])
    }

    /// Assembles [[a, b], [c, d]] from equal-size blocks.
    pub fn from_blocks(a: &Self, b: &Self, c: &Self, d: &Self) -> Self {
        let k = a.n;
        Self::from_fn(2 * k, |i, j| match (i < k, j < k) {
            (true, true) => a[(i, j)],
            (true, false) => b[(i, j - k)],
            (false, true) => c[(i - k, j)],
            (false, false) => d[(i - k, j - k)],
        })
    }

    /// LU factorisation with partial pivoting (pivot by modulus).
    pub fn lu(&self) -> Lu<T> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].modulus();
            for i in k + 1..n {
                let v = a[i * n + k].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                for j in k + 1..n {
                    let t = a[k * n + j];
                    a[i * n + j] -= f * t;
                }
            }
        }
        Lu {
            n,
            lu: a,
            perm,
            sign,
            singular,
        }
    }

    pub fn det(&self) -> T {
        self.lu().det()
    }

    /// Solves self · X = rhs.
    pub fn solve(&self, rhs: &Self) -> Result<Self, MatError> {
        self.lu().solve(rhs)
    }

    pub fn inverse(&self) -> Result<Self, MatError> {
        self.solve(&Self::identity(self.n))
    }
}

impl<T: RealScalar> Mat<T> {
    /// Promotes or converts entries to another scalar type.
    pub fn cast<U: Scalar + From<T>>(&self) -> Mat<U> {
        self.map(U::from)
    }
}

impl Mat<f64> {
    pub fn to_complex(&self) -> Mat<Complex64> {
        self.map(|x| Complex64::new(x, 0.0))
    }
}

impl Mat<Complex64> {
    pub fn re(&self) -> Mat<f64> {
        self.map(|z| z.re)
    }

    pub fn im(&self) -> Mat<f64> {
        self.map(|z| z.im)
    }
}

/// Packed LU factors.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl<T: Scalar> Lu<T> {
    pub fn det(&self) -> T {
        if self.singular {
            return T::zero();
        }
        let mut d = T::from_f64(self.sign);
        for i in 0..self.n {
            d *= self.lu[i * self.n + i];
        }
        d
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n).map(|i| self.lu[i * self.n + i]).collect()
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, rhs: &Mat<T>) -> Result<Mat<T>, MatError> {
        if self.singular {
            return Err(MatError::Singular);
        }
        let n = self.n;
        let mut x = Mat::zeros(n);
        for col in 0..n {
            let mut y: Vec<T> = (0..n).map(|i| rhs[(self.perm[i], col)]).collect();
            for i in 0..n {
                for k in 0..i {
                    let t = self.lu[i * n + k] * y[k];
                    y[i] -= t;
                }
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    let t = self.lu[i * n + k] * y[k];
                    y[i] -= t;
                }
                y[i] = y[i] / self.lu[i * n + i];
            }
            for i in 0..n {
                x[(i, col)] = y[i];
            }
        }
        Ok(x)
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Scalar> Add for &Mat<T> {
    type Output = Mat<T>;
    fn add(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        Mat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Mat<T> {
    type Output = Mat<T>;
    fn sub(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        Mat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Mul for &Mat<T> {
    type Output = Mat<T>;
    fn mul(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl<T: Scalar> Neg for &Mat<T> {
    type Output = Mat<T>;
    fn neg(self) -> Mat<T> {
        self.map(|x| -x)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl<T: Scalar> $tr for Mat<T> {
            type Output = Mat<T>;
            fn $f(self, rhs: Mat<T>) -> Mat<T> {
                (&self).$f(&rhs)
            }
        }
        impl<T: Scalar> $tr<&Mat<T>> for Mat<T> {
            type Output = Mat<T>;
            fn $f(self, rhs: &Mat<T>) -> Mat<T> {
                (&self).$f(rhs)
            }
        }
        impl<T: Scalar> $tr<Mat<T>> for &Mat<T> {
            type Output = Mat<T>;
            fn $f(self, rhs: Mat<T>) -> Mat<T> {
                self.$f(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl<T: Scalar> Neg for Mat<T> {
    type Output = Mat<T>;
    fn neg(self) -> Mat<T> {
        -&self
    }
}
