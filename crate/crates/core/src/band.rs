//! Square banded matrices in row-major band storage.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::C64;

/// Field of matrix entries: `f64` or `C64`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn to_c64(self) -> C64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn to_c64(self) -> C64 {
        self
    }
}

/// Square `n × n` matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `i` stores columns `i - kl ..= i + ku` at offsets `0 ..= kl + ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let kl = kl.min(n.saturating_sub(1));
        let ku = ku.min(n.saturating_sub(1));
        Self {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    /// Builds a banded matrix from a dense one, keeping only the band.
    pub fn from_dense(a: &Array2<T>, kl: usize, ku: usize) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "band matrices are square");
        let mut m = Self::zeros(a.nrows(), kl, ku);
        for i in 0..m.n {
            for j in m.row_range(i) {
                m.set(i, j, a[[i, j]]);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    /// Columns of row `i` that lie inside the band.
    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            T::zero()
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] += v;
    }

    /// Visits every stored entry as `(row, col, value)`.
    #[inline]
    pub fn for_each_stored<F: FnMut(usize, usize, T)>(&self, mut f: F) {
        let w = self.width();
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            for j in self.row_range(i) {
                f(i, j, row[j + self.kl - i]);
            }
        }
    }

    pub fn map<U: Scalar, F: Fn(T) -> U>(&self, f: F) -> BandMatrix<U> {
        BandMatrix {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.ku, self.kl);
        self.for_each_stored(|i, j, v| t.set(j, i, v));
        t
    }

    pub fn conj_transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.ku, self.kl);
        self.for_each_stored(|i, j, v| t.set(j, i, v.conj()));
        t
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// Linear combination `Σ c_k A_k` of equally sized band matrices.
    pub fn combine(parts: &[(T, &BandMatrix<T>)]) -> Self {
        assert!(!parts.is_empty());
        let n = parts[0].1.n;
        let kl = parts.iter().map(|(_, m)| m.kl).max().unwrap_or(0);
        let ku = parts.iter().map(|(_, m)| m.ku).max().unwrap_or(0);
        let mut out = Self::zeros(n, kl, ku);
        for (c, m) in parts {
            assert_eq!(m.n, n, "combine: size mismatch");
            m.for_each_stored(|i, j, v| out.add_to(i, j, *c * v));
        }
        out
    }

    /// Principal submatrix on the index range `lo..hi`.
    pub fn principal_submatrix(&self, lo: usize, hi: usize) -> Self {
        assert!(lo <= hi && hi <= self.n);
        let mut out = Self::zeros(hi - lo, self.kl, self.ku);
        for i in 0..out.n {
            for j in out.row_range(i) {
                out.set(i, j, self.get(i + lo, j + lo));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut a = Array2::from_elem((self.n, self.n), T::zero());
        self.for_each_stored(|i, j, v| a[[i, j]] = v);
        a
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut y = vec![T::zero(); self.n];
        self.for_each_stored(|i, j, v| y[i] += v * x[j]);
        Ok(y)
    }

    /// Largest `|A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        self.for_each_stored(|i, j, v| {
            worst = worst.max((v - self.get(j, i).conj()).modulus());
        });
        worst
    }
}
