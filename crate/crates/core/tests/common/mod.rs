//! Brute-force references shared by the integration tests: explicit
//! Kronecker products through nalgebra and space-time quadrature that
//! evaluates every basis function pointwise.

#![allow(dead_code)]

use std::ops::Range;

use kronschro::bspline::{element_quadrature, eval_basis};
use kronschro::tensorops::{Factor, KroneckerOperator};
use kronschro::{KnotVector, SpaceTimeProblem, C64};
use nalgebra::DMatrix;
use ndarray::Array2;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn factor_dense(f: &Factor, n: usize) -> DMatrix<C64> {
    match f {
        Factor::Identity => DMatrix::identity(n, n),
        Factor::Real(m) => DMatrix::from_fn(n, n, |i, j| C64::new(m.get(i, j), 0.0)),
        Factor::Complex(m) => DMatrix::from_fn(n, n, |i, j| m.get(i, j)),
    }
}

/// `Σ c · (F_d ⊗ … ⊗ F_0)` written out with nalgebra's Kronecker product.
pub fn kron_dense(op: &KroneckerOperator) -> DMatrix<C64> {
    let dims = op.dims();
    let n = op.size();
    let mut out = DMatrix::zeros(n, n);
    for t in op.terms() {
        let mut k = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for (axis, f) in t.factors.iter().enumerate() {
            k = factor_dense(f, dims[axis]).kronecker(&k);
        }
        out += k * t.coeff;
    }
    out
}

pub fn to_nalgebra(a: &Array2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn sample_vector(n: usize, seed: f64) -> Vec<C64> {
    (0..n)
        .map(|k| {
            let s = k as f64 + seed;
            C64::new((0.7 * s).sin() + 0.1, (1.3 * s + 0.4).cos())
        })
        .collect()
}

/// Values, first and second derivatives of every basis function of `kv` at `x`.
pub fn all_basis(kv: &KnotVector, x: f64) -> Vec<[f64; 3]> {
    let nder = kv.degree().min(2);
    let e = eval_basis(kv, x, nder).unwrap();
    let first = e.first_index();
    let mut out = vec![[0.0; 3]; kv.dim()];
    for (j, v) in out.iter_mut().skip(first).take(e.ders[0].len()).enumerate() {
        for k in 0..=nder {
            v[k] = e.ders[k][j];
        }
    }
    out
}

/// Tensor Gauss points `(t, x, weight)` over the space-time box with `npts`
/// points per element and direction.
pub fn space_time_points(prob: &SpaceTimeProblem, npts: usize) -> Vec<(f64, Vec<f64>, f64)> {
    let axes: Vec<Vec<(f64, f64)>> = (0..=prob.dim())
        .map(|k| {
            let kv = prob.axis(k);
            let rule = element_quadrature(kv, npts).unwrap();
            (0..kv.num_elements())
                .flat_map(|e| {
                    rule.element_nodes(e)
                        .iter()
                        .copied()
                        .zip(rule.element_weights(e).iter().copied())
                        .collect::<Vec<_>>()
                })
                .collect()
        })
        .collect();
    let mut pts = vec![(Vec::new(), 1.0)];
    for ax in &axes {
        let mut next = Vec::with_capacity(pts.len() * ax.len());
        for (coords, w) in &pts {
            for &(x, wx) in ax {
                let mut c = coords.clone();
                c.push(x);
                next.push((c, w * wx));
            }
        }
        pts = next;
    }
    pts.into_iter().map(|(c, w)| (c[0], c[1..].to_vec(), w)).collect()
}

/// Multi-indices of the box `ranges`, first axis fastest.
pub fn box_indices(ranges: &[Range<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for r in ranges {
        let mut next = Vec::new();
        for i in r.clone() {
            for idx in &out {
                let mut v: Vec<usize> = idx.clone();
                v.push(i);
                next.push(v);
            }
        }
        out = next;
    }
    // built with the last axis fastest; reorder so the first axis is fastest
    let dims: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
    let mut sorted = out;
    sorted.sort_by_key(|idx| {
        let mut lin = 0;
        for k in (0..dims.len()).rev() {
            lin = lin * dims[k] + (idx[k] - ranges[k].start);
        }
        lin
    });
    sorted
}

/// `B_i(t, x)` and `𝕊B_i(t, x)` for the tensor basis function with full
/// multi-index `idx`.
pub fn basis_and_image(prob: &SpaceTimeProblem, vals: &[Vec<[f64; 3]>], idx: &[usize]) -> (C64, C64) {
    let d = prob.dim();
    let space: f64 = (1..=d).map(|k| vals[k][idx[k]][0]).product();
    let b = vals[0][idx[0]][0] * space;
    let mut lap = 0.0;
    for l in 1..=d {
        let mut term = vals[0][idx[0]][0];
        for k in 1..=d {
            term *= vals[k][idx[k]][if k == l { 2 } else { 0 }];
        }
        lap += term;
    }
    let dt = vals[0][idx[0]][1] * space;
    (C64::new(b, 0.0), I * dt - prob.nu() * lap)
}

pub fn point_values(prob: &SpaceTimeProblem, t: f64, x: &[f64]) -> Vec<Vec<[f64; 3]>> {
    let mut vals = vec![all_basis(prob.axis(0), t)];
    for (k, &xk) in x.iter().enumerate() {
        vals.push(all_basis(prob.axis(k + 1), xk));
    }
    vals
}

/// `[(𝕊B_j, 𝕊B_i)]` over the index box `ranges`, by direct quadrature.
pub fn gram_by_quadrature(prob: &SpaceTimeProblem, ranges: &[Range<usize>], npts: usize) -> DMatrix<C64> {
    let idx = box_indices(ranges);
    let n = idx.len();
    let mut a = DMatrix::zeros(n, n);
    for (t, x, w) in space_time_points(prob, npts) {
        let vals = point_values(prob, t, &x);
        let s: Vec<C64> = idx.iter().map(|i| basis_and_image(prob, &vals, i).1).collect();
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += w * s[j] * s[i].conj();
            }
        }
    }
    a
}

/// `[(g, 𝕊B_i)]` or `[(g, B_i)]` over the free indices of `prob`.
pub fn moments_by_quadrature<F: Fn(f64, &[f64]) -> C64>(prob: &SpaceTimeProblem, g: F, against_image: bool, npts: usize) -> Vec<C64> {
    let idx = box_indices(&prob.free_ranges());
    let mut out = vec![ZERO; idx.len()];
    for (t, x, w) in space_time_points(prob, npts) {
        let vals = point_values(prob, t, &x);
        let gv = g(t, &x);
        for (o, i) in out.iter_mut().zip(&idx) {
            let (b, sb) = basis_and_image(prob, &vals, i);
            let test = if against_image { sb } else { b };
            *o += w * gv * test.conj();
        }
    }
    out
}

/// Manufactured solution given by plain functions.
pub struct Closed {
    pub d: usize,
    pub t_final: f64,
    pub nu: f64,
    pub homogeneous: bool,
    pub u: fn(f64, &[f64], f64) -> C64,
    pub f: fn(f64, &[f64], f64) -> C64,
}

impl kronschro::ManufacturedSolution for Closed {
    fn name(&self) -> &str {
        "closed"
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn final_time(&self) -> f64 {
        self.t_final
    }
    fn nu(&self) -> f64 {
        self.nu
    }
    fn u(&self, t: f64, x: &[f64]) -> C64 {
        (self.u)(t, x, self.nu)
    }
    fn f(&self, t: f64, x: &[f64]) -> C64 {
        (self.f)(t, x, self.nu)
    }
    fn homogeneous(&self) -> bool {
        self.homogeneous
    }
}

/// `u = t x (1 − x)`: degree 1 in time, 2 in space, zero initial and
/// boundary traces.
pub fn quadratic_bubble(nu: f64) -> Closed {
    Closed {
        d: 1,
        t_final: 1.0,
        nu,
        homogeneous: true,
        u: |t, x, _| C64::new(t * x[0] * (1.0 - x[0]), 0.0),
        f: |t, x, nu| I * x[0] * (1.0 - x[0]) + 2.0 * nu * t,
    }
}

/// `u = (1 + t)(1 + x + x²)`: in every space of degree ≥ 2 but with nonzero
/// traces.
pub fn shifted_quadratic(nu: f64) -> Closed {
    Closed {
        d: 1,
        t_final: 1.0,
        nu,
        homogeneous: false,
        u: |t, x, _| C64::new((1.0 + t) * (1.0 + x[0] + x[0] * x[0]), 0.0),
        f: |t, x, nu| I * (1.0 + x[0] + x[0] * x[0]) - 2.0 * nu * (1.0 + t),
    }
}
