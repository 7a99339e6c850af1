//! Symmetric and Hermitian eigenproblems, Cholesky, and banded LU.
//!
//! The dense symmetric solver is Householder tridiagonalization followed by
//! implicit-shift QL iteration. Generalized pencils are reduced to standard
//! form through the Cholesky factor of the right-hand matrix.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::band::{BandMatrix, Scalar};
use crate::error::{Error, Result};
use crate::C64;

/// Cap on dense pencil sizes used by diagnostics.
pub const PENCIL_CAP: usize = 4000;

const MAX_QL_SWEEPS: usize = 60;

/// `M`-orthonormal eigenvectors of a symmetric-definite pencil `(L, M)`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigenDecomposition {
    /// Columns are eigenvectors with `Uᵀ M U = I`.
    pub vectors: Array2<f64>,
    /// Ascending.
    pub values: Vec<f64>,
}

impl GeneralizedEigenDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spectral condition number of the eigenvector matrix, from its
    /// singular values.
    pub fn cond2(&self) -> Result<f64> {
        let utu = self.vectors.t().dot(&self.vectors);
        let (vals, _) = symmetric_eigen(&utu, false)?;
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        if lo <= 0.0 {
            return Err(Error::NotPositiveDefinite { index: 0 });
        }
        Ok((hi / lo).sqrt())
    }
}

/// Lower-triangular `C` with `A = C C*`.
pub fn cholesky<T: Scalar>(a: &Array2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let mut c = Array2::from_elem((n, n), T::zero());
    for j in 0..n {
        let mut diag = a[[j, j]].to_c64().re;
        for k in 0..j {
            diag -= c[[j, k]].modulus().powi(2);
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j });
        }
        let d = diag.sqrt();
        c[[j, j]] = T::from_real(d);
        let inv = T::from_real(1.0 / d);
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= c[[i, k]] * c[[j, k]].conj();
            }
            c[[i, j]] = s * inv;
        }
    }
    Ok(c)
}

/// Solves `C X = B` for lower-triangular `C`, column by column.
fn lower_solve<T: Scalar>(c: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let n = c.nrows();
    let mut x = b.clone();
    for col in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[[i, col]];
            for k in 0..i {
                s -= c[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = s / c[[i, i]];
        }
    }
    x
}

/// Solves `C* X = B` for lower-triangular `C`.
fn lower_adjoint_solve<T: Scalar>(c: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let n = c.nrows();
    let mut x = b.clone();
    for col in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut s = x[[i, col]];
            for k in i + 1..n {
                s -= c[[k, i]].conj() * x[[k, col]];
            }
            x[[i, col]] = s / c[[i, i]].conj();
        }
    }
    x
}

/// Solves `A X = B` given the Cholesky factor `C` of `A`.
pub fn cholesky_solve<T: Scalar>(c: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    lower_adjoint_solve(c, &lower_solve(c, b))
}

fn conj_transpose<T: Scalar>(a: &Array2<T>) -> Array2<T> {
    Array2::from_shape_fn((a.ncols(), a.nrows()), |(i, j)| a[[j, i]].conj())
}

/// `C⁻¹ A C⁻*`, symmetrized.
fn reduce_to_standard<T: Scalar>(a: &Array2<T>, c: &Array2<T>) -> Array2<T> {
    let y = lower_solve(c, a);
    let z = lower_solve(c, &conj_transpose(&y));
    let zt = conj_transpose(&z);
    let half = T::from_real(0.5);
    Array2::from_shape_fn(z.dim(), |(i, j)| (z[[i, j]] + zt[[i, j]]) * half)
}

/// Eigenvalues (ascending) and optionally eigenvectors (columns) of a real
/// symmetric matrix.
pub fn symmetric_eigen(a: &Array2<f64>, vectors: bool) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if n == 0 {
        return Ok((vec![], Array2::zeros((0, 0))));
    }
    let mut v: Vec<f64> = a.iter().copied().collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e, vectors)?;
    let mut vecs = Array2::from_shape_vec((n, n), v).expect("square");
    if vectors {
        normalize_signs(&mut vecs);
    }
    Ok((d, vecs))
}

/// Makes the largest-magnitude entry of each column positive.
fn normalize_signs(u: &mut Array2<f64>) {
    for mut col in u.columns_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

// Householder reduction to tridiagonal form; `v` is row-major `n × n` and
// holds the accumulated transformation on exit.
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e); sorts ascending.
fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], vectors: bool) -> Result<()> {
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if vectors {
                        for k in 0..n {
                            h = v[at(k, i + 1)];
                            v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                            v[at(k, i)] = c * v[at(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if vectors {
                for row in 0..n {
                    v.swap(at(row, i), at(row, k));
                }
            }
        }
    }
    Ok(())
}

/// Symmetric-definite pencil `(A, B)` in dense form.
pub fn dense_sym_geneig(a: &Array2<f64>, b: &Array2<f64>, vectors: bool) -> Result<GeneralizedEigenDecomposition> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.nrows(),
            found: a.nrows(),
        });
    }
    let c = cholesky(b)?;
    let std = reduce_to_standard(a, &c);
    let (values, q) = symmetric_eigen(&std, vectors)?;
    let mut u = if vectors {
        lower_adjoint_solve(&c, &q)
    } else {
        Array2::zeros((0, 0))
    };
    if vectors {
        normalize_signs(&mut u);
    }
    Ok(GeneralizedEigenDecomposition { vectors: u, values })
}

/// `L U = M U Λ` with `Uᵀ M U = I` for banded symmetric `L` and SPD `M`.
pub fn generalized_sym_eig(l: &BandMatrix<f64>, m: &BandMatrix<f64>) -> Result<GeneralizedEigenDecomposition> {
    if l.n() != m.n() {
        return Err(Error::DimensionMismatch {
            expected: m.n(),
            found: l.n(),
        });
    }
    dense_sym_geneig(&l.to_dense(), &m.to_dense(), true)
}

/// `κ₂(U) = √κ₂(M)` for the eigenvector matrix of any pencil `(·, M)`.
pub fn cond2_eigvec(m: &BandMatrix<f64>) -> Result<f64> {
    let (vals, _) = symmetric_eigen(&m.to_dense(), false)?;
    let (lo, hi) = (vals[0], vals[vals.len() - 1]);
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite { index: 0 });
    }
    Ok((hi / lo).sqrt())
}

/// Eigenvalues (ascending) of the Hermitian-definite pencil `(A, B)`.
///
/// After Cholesky reduction the Hermitian matrix `H = X + iY` is solved
/// through the real symmetric embedding `[[X, -Y], [Y, X]]`, whose spectrum
/// is that of `H` with every eigenvalue doubled.
pub fn dense_hermitian_geneig(a: &Array2<C64>, b: &Array2<C64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.dim() != b.dim() || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: b.nrows(),
            found: a.nrows(),
        });
    }
    if n > PENCIL_CAP {
        return Err(Error::CapExceeded {
            size: n,
            cap: PENCIL_CAP,
        });
    }
    let c = cholesky(b)?;
    let h = reduce_to_standard(a, &c);
    hermitian_eigenvalues(&h)
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(h: &Array2<C64>) -> Result<Vec<f64>> {
    let n = h.nrows();
    let emb = Array2::from_shape_fn((2 * n, 2 * n), |(i, j)| {
        let z = h[[i % n, j % n]];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let (vals, _) = symmetric_eigen(&emb, false)?;
    Ok(vals.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

/// LU factors of a banded matrix with partial pivoting inside the band.
#[derive(Debug, Clone)]
pub struct BandedFactorization<T> {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row `i` holds columns `i - kl ..= i + kl + ku`.
    data: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Scalar> BandedFactorization<T> {
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + j + self.kl - i
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `H x = y` in place.
    pub fn solve_in_place(&self, b: &mut [T]) -> Result<()> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..(k + self.kl + 1).min(n) {
                b[i] -= self.data[self.idx(i, k)] * bk;
            }
        }
        let ud = self.kl + self.ku;
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..(k + ud + 1).min(n) {
                s -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
        Ok(())
    }

    pub fn solve(&self, y: &[T]) -> Result<Vec<T>> {
        let mut x = y.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Solves `H* x = y`.
    pub fn solve_adjoint(&self, y: &[T]) -> Result<Vec<T>> {
        let n = self.n;
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        let mut b = y.to_vec();
        let ud = self.kl + self.ku;
        for k in 0..n {
            let mut s = b[k];
            for i in k.saturating_sub(ud)..k {
                s -= self.data[self.idx(i, k)].conj() * b[i];
            }
            b[k] = s / self.data[self.idx(k, k)].conj();
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for i in k + 1..(k + self.kl + 1).min(n) {
                s -= self.data[self.idx(i, k)].conj() * b[i];
            }
            b[k] = s;
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
        }
        Ok(b)
    }
}

/// Banded LU with partial pivoting; the upper factor grows to `kl + ku`
/// super-diagonals.
pub fn factor_banded<T: Scalar>(h: &BandMatrix<T>) -> Result<BandedFactorization<T>> {
    let n = h.n();
    let (kl, ku) = (h.lower(), h.upper());
    let mut f = BandedFactorization {
        n,
        kl,
        ku,
        data: vec![T::zero(); n * (2 * kl + ku + 1)],
        pivots: vec![0; n],
    };
    let mut scale = 0.0f64;
    h.for_each_stored(|i, j, v| {
        let k = f.idx(i, j);
        f.data[k] = v;
        scale = scale.max(v.modulus());
    });
    let tiny = scale * f64::EPSILON * n as f64;
    let ud = kl + ku;
    for k in 0..n {
        let last = (k + kl + 1).min(n);
        let mut p = k;
        let mut best = f.data[f.idx(k, k)].modulus();
        for i in k + 1..last {
            let v = f.data[f.idx(i, k)].modulus();
            if v > best {
                best = v;
                p = i;
            }
        }
        if !(best > tiny) {
            return Err(Error::SingularPivot { index: k });
        }
        f.pivots[k] = p;
        let cend = (k + ud + 1).min(n);
        if p != k {
            for j in k..cend {
                let (a, b) = (f.idx(k, j), f.idx(p, j));
                f.data.swap(a, b);
            }
        }
        let pivot = f.data[f.idx(k, k)];
        for i in k + 1..last {
            let li = f.idx(i, k);
            let l = f.data[li] / pivot;
            f.data[li] = l;
            if l == T::zero() {
                continue;
            }
            for j in k + 1..cend {
                let src = f.data[f.idx(k, j)];
                let dst = f.idx(i, j);
                f.data[dst] -= l * src;
            }
        }
    }
    Ok(f)
}

pub fn solve_banded<T: Scalar>(f: &BandedFactorization<T>, y: &[T]) -> Result<Vec<T>> {
    f.solve(y)
}

/// Largest eigenvalue of an operator `T` that is self-adjoint in the inner
/// product `⟨x, y⟩_G = y* G x`, by Lanczos with full reorthogonalization.
///
/// `apply_t` and `apply_g` map a vector to `T x` and `G x`. Returns the Ritz
/// value once its residual estimate falls below `tol` relative.
pub fn lanczos_largest<FT, FG>(n: usize, mut apply_t: FT, mut apply_g: FG, seed: u64, max_steps: usize, tol: f64) -> Result<f64>
where
    FT: FnMut(&[C64]) -> Result<Vec<C64>>,
    FG: FnMut(&[C64]) -> Result<Vec<C64>>,
{
    let dot = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x * y.conj()).sum() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut gq = apply_g(&q)?;
    let nrm = dot(&q, &gq).re.sqrt();
    q.iter_mut().for_each(|z| *z /= nrm);
    gq.iter_mut().for_each(|z| *z /= nrm);

    let mut basis: Vec<Vec<C64>> = vec![q];
    let mut gbasis: Vec<Vec<C64>> = vec![gq];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let steps = max_steps.min(n).max(1);
    let mut theta = f64::NAN;
    for j in 0..steps {
        let mut w = apply_t(&basis[j])?;
        let alpha = dot(&w, &gbasis[j]).re;
        for _ in 0..2 {
            for (qi, gqi) in basis.iter().zip(&gbasis) {
                let h = dot(&w, gqi);
                w.iter_mut().zip(qi).for_each(|(x, y)| *x -= h * y);
            }
        }
        alphas.push(alpha);
        let gw = apply_g(&w)?;
        let beta = dot(&w, &gw).re.max(0.0).sqrt();

        let k = alphas.len();
        let check = k == steps || k % 5 == 0 || beta <= 1e-14 * alpha.abs().max(1.0);
        if check {
            let tri = Array2::from_shape_fn((k, k), |(r, c)| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let (vals, vecs) = symmetric_eigen(&tri, true)?;
            theta = vals[k - 1];
            let resid = beta * vecs[[k - 1, k - 1]].abs();
            if resid <= tol * theta.abs() || beta <= 1e-14 * theta.abs() {
                return Ok(theta);
            }
        }
        if k == steps {
            break;
        }
        betas.push(beta);
        let inv = 1.0 / beta;
        basis.push(w.iter().map(|z| z * inv).collect());
        gbasis.push(gw.iter().map(|z| z * inv).collect());
    }
    if theta.is_finite() {
        Ok(theta)
    } else {
        Err(Error::NoConvergence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{univariate_real, MatrixKind, Restriction};
    use crate::bspline::KnotVector;
    use rand::Rng;

    fn frob(a: &Array2<f64>) -> f64 {
        a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn diagonal_pencil_gives_signed_permutation() {
        let mut l = BandMatrix::<f64>::zeros(3, 0, 0);
        for (i, v) in [9.0, 1.0, 4.0].into_iter().enumerate() {
            l.set(i, i, v);
        }
        let g = generalized_sym_eig(&l, &BandMatrix::identity(3)).unwrap();
        assert_eq!(g.values.iter().map(|v| v.round()).collect::<Vec<_>>(), vec![1.0, 4.0, 9.0]);
        for col in g.vectors.columns() {
            let nz: Vec<f64> = col.iter().copied().filter(|x| x.abs() > 1e-12).collect();
            assert_eq!(nz.len(), 1);
            assert!((nz[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_pencil_residuals() {
        let kv = KnotVector::uniform(3, 16, 0.0, 1.0).unwrap();
        let l = univariate_real(MatrixKind::Stiffness, &kv, Restriction::DropBoth).unwrap();
        let m = univariate_real(MatrixKind::Mass, &kv, Restriction::DropBoth).unwrap();
        let g = generalized_sym_eig(&l, &m).unwrap();
        let (ld, md) = (l.to_dense(), m.to_dense());
        let u = &g.vectors;
        let lam = Array2::from_diag(&ndarray::Array1::from(g.values.clone()));
        assert!(frob(&(ld.dot(u) - md.dot(u).dot(&lam))) <= 1e-10);
        assert!(frob(&(u.t().dot(&md).dot(u) - Array2::<f64>::eye(u.ncols()))) <= 1e-10);
        assert!(g.values.iter().all(|&v| v > 0.0));
        assert!(g.values.windows(2).all(|w| w[0] <= w[1]));
        let k1 = g.cond2().unwrap();
        let k2 = cond2_eigvec(&m).unwrap();
        assert!((k1 - k2).abs() < 1e-8 * k2);
    }

    #[test]
    fn table_one_degree_two_value() {
        for n_el in [32, 64, 128] {
            let kv = KnotVector::uniform(2, n_el, 0.0, 1.0).unwrap();
            let m = univariate_real(MatrixKind::Mass, &kv, Restriction::DropBoth).unwrap();
            let k = cond2_eigvec(&m).unwrap();
            assert!((k - 2.7).abs() <= 0.1, "{k}");
        }
    }

    #[test]
    fn identity_mass_has_unit_condition() {
        assert!((cond2_eigvec(&BandMatrix::identity(5)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = ndarray::arr2(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { index: 1 })));
        let mut m = BandMatrix::<f64>::identity(2);
        m.set(1, 1, -1.0);
        assert!(generalized_sym_eig(&BandMatrix::identity(2), &m).is_err());
    }

    #[test]
    fn hermitian_pencil_small_cases() {
        let c = |x: f64| C64::new(x, 0.0);
        let a = ndarray::arr2(&[[c(2.0), c(0.0)], [c(0.0), c(8.0)]]);
        let b = ndarray::arr2(&[[c(1.0), c(0.0)], [c(0.0), c(2.0)]]);
        let v = dense_hermitian_geneig(&a, &b).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-13 && (v[1] - 4.0).abs() < 1e-13);
        let h = ndarray::arr2(&[[c(2.0), C64::new(0.0, 1.0)], [C64::new(0.0, -1.0), c(2.0)]]);
        let v = dense_hermitian_geneig(&h, &h).unwrap();
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-13));
        // eigenvalues 1 and 3
        let v = hermitian_eigenvalues(&h).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-13 && (v[1] - 3.0).abs() < 1e-13);
    }

    /// Roots of det(A - λB) for 3×3 Hermitian pencils by bisection on the
    /// characteristic polynomial.
    #[test]
    fn hermitian_pencil_matches_characteristic_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let mut r = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let x = Array2::from_shape_fn((3, 3), |_| r());
            let y = Array2::from_shape_fn((3, 3), |_| r());
            let a = &x + &conj_transpose(&x);
            let b = y.dot(&conj_transpose(&y)) + Array2::from_diag_elem(3, C64::new(0.5, 0.0));
            let det3 = |lam: f64| -> f64 {
                let m = &a - &b.mapv(|z| z * lam);
                let d = m[[0, 0]] * (m[[1, 1]] * m[[2, 2]] - m[[1, 2]] * m[[2, 1]])
                    - m[[0, 1]] * (m[[1, 0]] * m[[2, 2]] - m[[1, 2]] * m[[2, 0]])
                    + m[[0, 2]] * (m[[1, 0]] * m[[2, 1]] - m[[1, 1]] * m[[2, 0]]);
                d.re
            };
            // bracket roots on a fine grid
            let mut roots = Vec::new();
            let (lo, hi, steps) = (-60.0, 60.0, 240_000);
            let mut prev = det3(lo);
            for s in 1..=steps {
                let x1 = lo + (hi - lo) * s as f64 / steps as f64;
                let cur = det3(x1);
                if prev == 0.0 || prev.signum() != cur.signum() {
                    let (mut a0, mut b0) = (x1 - (hi - lo) / steps as f64, x1);
                    for _ in 0..200 {
                        let mid = 0.5 * (a0 + b0);
                        if det3(a0).signum() == det3(mid).signum() {
                            a0 = mid;
                        } else {
                            b0 = mid;
                        }
                    }
                    roots.push(0.5 * (a0 + b0));
                }
                prev = cur;
            }
            let got = dense_hermitian_geneig(&a, &b).unwrap();
            assert_eq!(roots.len(), 3);
            for (r, g) in roots.iter().zip(&got) {
                assert!((r - g).abs() <= 1e-9 * (1.0 + r.abs()), "{r} vs {g}");
            }
        }
    }

    #[test]
    fn banded_identity_and_tridiagonal() {
        let f = factor_banded(&BandMatrix::<C64>::identity(4)).unwrap();
        let y: Vec<C64> = (0..4).map(|i| C64::new(i as f64, -1.0)).collect();
        assert_eq!(solve_banded(&f, &y).unwrap(), y);

        let mut t = BandMatrix::<f64>::zeros(5, 1, 1);
        for i in 0..5 {
            t.set(i, i, 2.0);
            if i > 0 {
                t.set(i, i - 1, -1.0);
                t.set(i - 1, i, -1.0);
            }
        }
        let f = factor_banded(&t).unwrap();
        let x = f.solve(&[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        // inverse of tridiag(-1,2,-1) first column: (n+1-i)/(n+1)
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - (5 - i) as f64 / 6.0).abs() < 1e-13);
        }
    }

    #[test]
    fn banded_random_hermitian_pd_and_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, half) = (40, 3);
        let mut h = BandMatrix::<C64>::zeros(n, half, half);
        for i in 0..n {
            for j in h.row_range(i) {
                if j > i {
                    let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    h.set(i, j, z);
                    h.set(j, i, z.conj());
                }
            }
            h.set(i, i, C64::new(2.0 * half as f64 + 2.0, 0.0));
        }
        let y: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let f = factor_banded(&h).unwrap();
        let x = f.solve(&y).unwrap();
        let r = h.matvec(&x).unwrap();
        let ymax = y.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(r.iter().zip(&y).all(|(a, b)| (a - b).norm() <= 1e-11 * ymax));
        let xa = f.solve_adjoint(&y).unwrap();
        let ra = h.conj_transpose().matvec(&xa).unwrap();
        assert!(ra.iter().zip(&y).all(|(a, b)| (a - b).norm() <= 1e-11 * ymax));

        // a matrix that needs row exchanges: zero diagonal
        let mut g = BandMatrix::<C64>::zeros(n, 2, 1);
        for i in 0..n {
            for j in g.row_range(i) {
                if i != j {
                    g.set(i, j, C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                }
            }
        }
        let f = factor_banded(&g).unwrap();
        let x = f.solve(&y).unwrap();
        let r = g.matvec(&x).unwrap();
        let rmax = r.iter().zip(&y).fold(0.0f64, |a, (p, q)| a.max((p - q).norm()));
        assert!(rmax <= 1e-9 * ymax, "{rmax}");
        let xa = f.solve_adjoint(&y).unwrap();
        let ra = g.conj_transpose().matvec(&xa).unwrap();
        let rmax = ra.iter().zip(&y).fold(0.0f64, |a, (p, q)| a.max((p - q).norm()));
        assert!(rmax <= 1e-9 * ymax, "{rmax}");
    }

    #[test]
    fn singular_band_is_reported() {
        let z = BandMatrix::<f64>::zeros(3, 1, 1);
        assert!(matches!(factor_banded(&z), Err(Error::SingularPivot { index: 0 })));
    }

    #[test]
    fn lanczos_finds_largest_generalized_eigenvalue() {
        // T = B^{-1} A for diagonal A, B; eigenvalues a_i / b_i
        let n = 60;
        let a: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| 2.0 + (i % 7) as f64).collect();
        let expect = a.iter().zip(&b).map(|(x, y)| x / y).fold(0.0, f64::max);
        let got = lanczos_largest(
            n,
            |x| Ok(x.iter().enumerate().map(|(i, z)| z * (a[i] / b[i])).collect()),
            |x| Ok(x.iter().enumerate().map(|(i, z)| z * b[i]).collect()),
            1,
            200,
            1e-12,
        )
        .unwrap();
        assert!((got - expect).abs() < 1e-9 * expect);
    }
}
