//! Dense complex tensors in time-fastest `vec` ordering, m-mode products and
//! matrix-free Kronecker-sum operators.

use std::ops::Mul;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;

use crate::band::{BandMatrix, Scalar};
use crate::bspline::BasisTable;
use crate::error::{Error, Result};
use crate::C64;

/// Default bound on `Π dims` for dense expansion.
pub const DENSE_CAP: usize = 20_000;

/// Work below this many entries stays on the calling thread.
const PAR_THRESHOLD: usize = 1 << 15;

/// `(d+1)`-way complex tensor. Axis 0 is time and varies fastest in the
/// linear storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTensor {
    dims: Vec<usize>,
    data: Vec<C64>,
}

impl CoeffTensor {
    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            data: vec![C64::new(0.0, 0.0); dims.iter().product()],
        }
    }

    /// Wraps a `vec`-ordered vector.
    pub fn from_vec(dims: &[usize], data: Vec<C64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: data.len(),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// `vec(X)`.
    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    /// Linear position of a multi-index.
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        linear_index(&self.dims, idx)
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: C64) {
        let k = self.linear_index(idx);
        self.data[k] = v;
    }
}

/// `j = i_0 + Σ_k i_k Π_{l<k} n_l` (0-based).
pub fn linear_index(dims: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), idx.len());
    let mut j = 0;
    let mut stride = 1;
    for (&n, &i) in dims.iter().zip(idx) {
        debug_assert!(i < n);
        j += i * stride;
        stride *= n;
    }
    j
}

/// Inverse of [`linear_index`].
pub fn multi_index(dims: &[usize], mut j: usize) -> Vec<usize> {
    dims.iter()
        .map(|&n| {
            let i = j % n;
            j /= n;
            i
        })
        .collect()
}

/// A matrix that can act along one tensor axis.
pub trait AxisMatrix: Sync {
    type Elem: Copy + Send + Sync;
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// Visits every (structurally) nonzero entry `(row, col, value)`.
    fn for_each_entry<F: FnMut(usize, usize, Self::Elem)>(&self, f: F);
}

impl<T: Scalar> AxisMatrix for BandMatrix<T> {
    type Elem = T;
    fn nrows(&self) -> usize {
        self.n()
    }
    fn ncols(&self) -> usize {
        self.n()
    }
    fn for_each_entry<F: FnMut(usize, usize, T)>(&self, f: F) {
        self.for_each_stored(f)
    }
}

impl<T: Scalar> AxisMatrix for Array2<T> {
    type Elem = T;
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn for_each_entry<F: FnMut(usize, usize, T)>(&self, mut f: F) {
        for ((i, j), &v) in self.indexed_iter() {
            f(i, j, v)
        }
    }
}

/// Rows are points, columns the basis functions in `offset..offset + ncols`.
#[derive(Debug, Clone, Copy)]
pub struct TableView<'a> {
    pub table: &'a BasisTable,
    pub order: usize,
    pub offset: usize,
    pub ncols: usize,
}

impl<'a> TableView<'a> {
    pub fn full(table: &'a BasisTable, order: usize) -> Self {
        Self {
            table,
            order,
            offset: 0,
            ncols: table.nbasis(),
        }
    }
}

impl AxisMatrix for TableView<'_> {
    type Elem = f64;
    fn nrows(&self) -> usize {
        self.table.npoints()
    }
    fn ncols(&self) -> usize {
        self.ncols
    }
    fn for_each_entry<F: FnMut(usize, usize, f64)>(&self, mut f: F) {
        let (lo, hi) = (self.offset, self.offset + self.ncols);
        self.table.for_each_nonzero(self.order, |q, i, v| {
            if i >= lo && i < hi {
                f(q, i - lo, v)
            }
        })
    }
}

/// Transpose of a borrowed axis matrix.
#[derive(Debug, Clone, Copy)]
pub struct Transposed<'a, M>(pub &'a M);

impl<M: AxisMatrix> AxisMatrix for Transposed<'_, M> {
    type Elem = M::Elem;
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.nrows()
    }
    fn for_each_entry<F: FnMut(usize, usize, M::Elem)>(&self, mut f: F) {
        self.0.for_each_entry(|i, j, v| f(j, i, v))
    }
}

/// `X ×_axis J`: contracts axis `axis` of `x` with the columns of `j`.
pub fn mode_product<M>(x: &CoeffTensor, j: &M, axis: usize) -> Result<CoeffTensor>
where
    M: AxisMatrix,
    C64: Mul<M::Elem, Output = C64>,
{
    if axis >= x.dims.len() {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for order-{} tensor",
            x.dims.len()
        )));
    }
    let n = x.dims[axis];
    if j.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: j.ncols(),
        });
    }
    let inner: usize = x.dims[..axis].iter().product();
    let rows = j.nrows();
    let mut dims = x.dims.clone();
    dims[axis] = rows;
    let mut out = CoeffTensor::zeros(&dims);
    if out.data.is_empty() || x.data.is_empty() {
        return Ok(out);
    }

    let kernel = |(src, dst): (&[C64], &mut [C64])| {
        j.for_each_entry(|r, k, v| {
            let s = &src[k * inner..(k + 1) * inner];
            let d = &mut dst[r * inner..(r + 1) * inner];
            for (d, &s) in d.iter_mut().zip(s) {
                *d += s * v;
            }
        })
    };
    let src_chunks = x.data.chunks(inner * n);
    let dst_chunks = out.data.chunks_mut(inner * rows);
    if x.data.len() >= PAR_THRESHOLD && x.data.len() / (inner * n) > 1 {
        src_chunks
            .collect::<Vec<_>>()
            .into_par_iter()
            .zip(dst_chunks.collect::<Vec<_>>())
            .for_each(kernel);
    } else {
        src_chunks.zip(dst_chunks).for_each(kernel);
    }
    Ok(out)
}

/// One Kronecker factor acting on a single axis.
#[derive(Debug, Clone)]
pub enum Factor {
    Identity,
    Real(Arc<BandMatrix<f64>>),
    Complex(Arc<BandMatrix<C64>>),
}

impl Factor {
    pub fn real(m: BandMatrix<f64>) -> Self {
        Factor::Real(Arc::new(m))
    }

    pub fn complex(m: BandMatrix<C64>) -> Self {
        Factor::Complex(Arc::new(m))
    }

    fn size(&self) -> Option<usize> {
        match self {
            Factor::Identity => None,
            Factor::Real(m) => Some(m.n()),
            Factor::Complex(m) => Some(m.n()),
        }
    }

    fn bandwidths(&self) -> (usize, usize) {
        match self {
            Factor::Identity => (0, 0),
            Factor::Real(m) => (m.lower(), m.upper()),
            Factor::Complex(m) => (m.lower(), m.upper()),
        }
    }

    fn apply(&self, x: &CoeffTensor, axis: usize) -> Result<Option<CoeffTensor>> {
        Ok(match self {
            Factor::Identity => None,
            Factor::Real(m) => Some(mode_product(x, m.as_ref(), axis)?),
            Factor::Complex(m) => Some(mode_product(x, m.as_ref(), axis)?),
        })
    }

    fn entry(&self, i: usize, j: usize) -> C64 {
        match self {
            Factor::Identity => {
                if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            Factor::Real(m) => C64::new(m.get(i, j), 0.0),
            Factor::Complex(m) => m.get(i, j),
        }
    }
}

/// `c · (J_d ⊗ … ⊗ J_0)`; `factors[0]` acts on the time axis.
#[derive(Debug, Clone)]
pub struct KroneckerTerm {
    pub coeff: C64,
    pub factors: Vec<Factor>,
}

impl KroneckerTerm {
    pub fn new(coeff: C64, factors: Vec<Factor>) -> Self {
        Self { coeff, factors }
    }
}

/// Sum of Kronecker terms over common axis sizes.
#[derive(Debug, Clone)]
pub struct KroneckerOperator {
    dims: Vec<usize>,
    terms: Vec<KroneckerTerm>,
}

impl KroneckerOperator {
    pub fn new(dims: Vec<usize>, terms: Vec<KroneckerTerm>) -> Result<Self> {
        for t in &terms {
            if t.factors.len() != dims.len() {
                return Err(Error::InvalidArgument(format!(
                    "term has {} factors for {} axes",
                    t.factors.len(),
                    dims.len()
                )));
            }
            for (f, &n) in t.factors.iter().zip(&dims) {
                if let Some(k) = f.size() {
                    if k != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            found: k,
                        });
                    }
                }
            }
        }
        Ok(Self { dims, terms })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn terms(&self) -> &[KroneckerTerm] {
        &self.terms
    }

    /// Entry of the induced matrix at `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> C64 {
        let ri = multi_index(&self.dims, row);
        let ci = multi_index(&self.dims, col);
        self.terms
            .iter()
            .map(|t| {
                t.factors
                    .iter()
                    .enumerate()
                    .fold(t.coeff, |acc, (k, f)| acc * f.entry(ri[k], ci[k]))
            })
            .sum()
    }
}

/// Applies the operator matrix-free: per term, one mode product per
/// non-identity axis, summed in declaration order.
pub fn kron_apply(k: &KroneckerOperator, v: &[C64]) -> Result<Vec<C64>> {
    let n = k.size();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    let x = CoeffTensor::from_vec(&k.dims, v.to_vec())?;
    let mut out = vec![C64::new(0.0, 0.0); n];
    for term in &k.terms {
        let mut cur: Option<CoeffTensor> = None;
        for (axis, f) in term.factors.iter().enumerate() {
            let src = cur.as_ref().unwrap_or(&x);
            if let Some(next) = f.apply(src, axis)? {
                cur = Some(next);
            }
        }
        let y = cur.as_ref().unwrap_or(&x);
        let c = term.coeff;
        for (o, &yi) in out.iter_mut().zip(y.as_slice()) {
            *o += c * yi;
        }
    }
    Ok(out)
}

/// Explicit dense matrix of the operator, guarded by [`DENSE_CAP`].
pub fn kron_to_dense(k: &KroneckerOperator) -> Result<Array2<C64>> {
    kron_to_dense_capped(k, DENSE_CAP)
}

pub fn kron_to_dense_capped(k: &KroneckerOperator, cap: usize) -> Result<Array2<C64>> {
    let n = k.size();
    if n > cap {
        return Err(Error::CapExceeded { size: n, cap });
    }
    let mut a = Array2::from_elem((n, n), C64::new(0.0, 0.0));
    for term in &k.terms {
        // dense Kronecker product built right to left: J_d ⊗ … ⊗ J_0
        let mut block = Array2::from_elem((1, 1), term.coeff);
        for (axis, f) in term.factors.iter().enumerate() {
            let nk = k.dims[axis];
            let (r0, c0) = block.dim();
            let mut next = Array2::from_elem((r0 * nk, c0 * nk), C64::new(0.0, 0.0));
            for i in 0..nk {
                for j in 0..nk {
                    let e = f.entry(i, j);
                    if e == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for r in 0..r0 {
                        for c in 0..c0 {
                            next[[i * r0 + r, j * c0 + c]] = e * block[[r, c]];
                        }
                    }
                }
            }
            block = next;
        }
        a += &block;
    }
    Ok(a)
}

/// Assembles the operator as one banded matrix in `vec` ordering.
pub fn kron_to_banded(k: &KroneckerOperator) -> BandMatrix<C64> {
    let n = k.size();
    let mut strides = Vec::with_capacity(k.dims.len());
    let mut s = 1;
    for &d in &k.dims {
        strides.push(s);
        s *= d;
    }
    let (mut kl, mut ku) = (0, 0);
    for t in &k.terms {
        let (mut l, mut u) = (0, 0);
        for (f, &st) in t.factors.iter().zip(&strides) {
            let (fl, fu) = f.bandwidths();
            l += fl * st;
            u += fu * st;
        }
        kl = kl.max(l);
        ku = ku.max(u);
    }
    let mut out = BandMatrix::zeros(n, kl, ku);
    for t in &k.terms {
        let mut entries: Vec<(usize, usize, C64)> = vec![(0, 0, t.coeff)];
        for (axis, f) in t.factors.iter().enumerate() {
            let st = strides[axis];
            let mut local: Vec<(usize, usize, C64)> = Vec::new();
            match f {
                Factor::Identity => {
                    (0..k.dims[axis]).for_each(|i| local.push((i, i, C64::new(1.0, 0.0))))
                }
                Factor::Real(m) => m.for_each_stored(|i, j, v| {
                    if v != 0.0 {
                        local.push((i, j, C64::new(v, 0.0)))
                    }
                }),
                Factor::Complex(m) => m.for_each_stored(|i, j, v| {
                    if v != C64::new(0.0, 0.0) {
                        local.push((i, j, v))
                    }
                }),
            }
            entries = entries
                .iter()
                .flat_map(|&(r, c, v)| local.iter().map(move |&(i, j, w)| (r + i * st, c + j * st, v * w)))
                .collect();
        }
        for (r, c, v) in entries {
            out.add_to(r, c, v);
        }
    }
    out
}
