//! Univariate B-spline spaces on open knot vectors.

use std::f64::consts::PI;

use crate::band::BandMatrix;
use crate::error::{Error, Result};

/// Open knot vector `ξ_0 ≤ … ≤ ξ_{m+p}` spanning a spline space of dimension `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Uniform open knot vector with `n_el` elements on `[a, b]` and simple
    /// interior knots.
    pub fn uniform(degree: usize, n_el: usize, a: f64, b: f64) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidArgument("degree must be at least 1".into()));
        }
        if n_el < 1 {
            return Err(Error::InvalidArgument("need at least one element".into()));
        }
        if !(a < b) {
            return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
        }
        let mut knots = vec![a; degree + 1];
        for i in 1..n_el {
            knots.push(a + (b - a) * i as f64 / n_el as f64);
        }
        knots.extend(std::iter::repeat_n(b, degree + 1));
        Ok(Self { degree, knots })
    }

    /// Arbitrary open knot vector; interior multiplicities must not exceed `degree`.
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidArgument("degree must be at least 1".into()));
        }
        if knots.len() < 2 * degree + 2 {
            return Err(Error::InvalidArgument("too few knots".into()));
        }
        if knots.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidArgument("knots must be non-decreasing".into()));
        }
        let a = knots[0];
        let b = knots[knots.len() - 1];
        if !(a < b) {
            return Err(Error::InvalidArgument("degenerate knot vector".into()));
        }
        let kv = Self { degree, knots };
        let m = kv.dim();
        if kv.knots[..=degree].iter().any(|&k| k != a) || kv.knots[m..].iter().any(|&k| k != b) {
            return Err(Error::InvalidArgument("knot vector is not open".into()));
        }
        if kv.max_interior_multiplicity() > degree {
            return Err(Error::InvalidArgument(
                "interior knot multiplicity exceeds the degree".into(),
            ));
        }
        Ok(kv)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Dimension `m` of the spline space.
    pub fn dim(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Distinct knot values.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut z: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if z.last() != Some(&k) {
                z.push(k);
            }
        }
        z
    }

    pub fn num_elements(&self) -> usize {
        self.breakpoints().len() - 1
    }

    pub fn mesh_size(&self) -> f64 {
        self.knots.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    fn max_interior_multiplicity(&self) -> usize {
        let (a, b) = (self.start(), self.end());
        let mut best = 0;
        let mut run = 0;
        let mut prev = f64::NAN;
        for &k in &self.knots {
            if k == a || k == b {
                continue;
            }
            run = if k == prev { run + 1 } else { 1 };
            prev = k;
            best = best.max(run);
        }
        best
    }

    /// Global continuity order `p - max interior multiplicity`.
    pub fn continuity(&self) -> i64 {
        self.degree as i64 - self.max_interior_multiplicity() as i64
    }

    /// Index `i` of the knot span `[ξ_i, ξ_{i+1})` containing `x`; the last
    /// nonempty span is used at the right endpoint.
    pub fn find_span(&self, x: f64) -> Result<usize> {
        let (a, b) = (self.start(), self.end());
        if !(x >= a && x <= b) {
            return Err(Error::OutOfDomain { x, a, b });
        }
        let m = self.dim();
        if x == b {
            return Ok(m - 1);
        }
        let (mut lo, mut hi) = (self.degree, m);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(lo)
    }

    /// Nonempty elements as `(left, right, span)`.
    pub fn elements(&self) -> Vec<(f64, f64, usize)> {
        (self.degree..self.dim())
            .filter(|&i| self.knots[i] < self.knots[i + 1])
            .map(|i| (self.knots[i], self.knots[i + 1], i))
            .collect()
    }
}

/// The `p + 1` basis functions that are nonzero at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    /// Knot span index; the active functions are `span - p ..= span`.
    pub span: usize,
    /// `ders[k][j]` is the `k`-th derivative of basis `span - p + j`.
    pub ders: Vec<Vec<f64>>,
}

impl BasisEval {
    pub fn first_index(&self) -> usize {
        self.span + 1 - self.ders[0].len()
    }
}

/// Cox-de Boor evaluation of the nonzero basis functions and their
/// derivatives up to `nderiv` at `x`.
pub fn eval_basis(kv: &KnotVector, x: f64, nderiv: usize) -> Result<BasisEval> {
    let p = kv.degree;
    if nderiv > p {
        return Err(Error::InvalidArgument(format!(
            "derivative order {nderiv} exceeds degree {p}"
        )));
    }
    let span = kv.find_span(x)?;
    let u = &kv.knots;

    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - u[span + 1 - j];
        right[j] = u[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![vec![0.0; p + 1]; nderiv + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }

    let (pi, ni) = (p as i64, nderiv as i64);
    let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
    for r in 0..=pi {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0].iter_mut().for_each(|v| *v = 0.0);
        a[0][0] = 1.0;
        for k in 1..=ni {
            let mut d = 0.0;
            let rk = r - k;
            let pk = pi - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk as usize];
            }
            let j1 = if rk >= -1 { 1 } else { -rk };
            let j2 = if r - 1 <= pk { k - 1 } else { pi - r };
            for j in j1..=j2 {
                let (ju, rkj) = (j as usize, (rk + j) as usize);
                a[s2][ju] = (a[s1][ju] - a[s1][ju - 1]) / ndu[(pk + 1) as usize][rkj];
                d += a[s2][ju] * ndu[rkj][pk as usize];
            }
            if r <= pk {
                let ku = k as usize;
                a[s2][ku] = -a[s1][ku - 1] / ndu[(pk + 1) as usize][r as usize];
                d += a[s2][ku] * ndu[r as usize][pk as usize];
            }
            ders[k as usize][r as usize] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=nderiv {
        for v in ders[k].iter_mut() {
            *v *= factor;
        }
        factor *= (p - k) as f64;
    }
    Ok(BasisEval { span, ders })
}

/// Greville abscissae `γ_i = (ξ_{i+1} + … + ξ_{i+p}) / p`.
pub fn greville_abscissae(kv: &KnotVector) -> Vec<f64> {
    let p = kv.degree;
    (0..kv.dim())
        .map(|i| kv.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
        .collect()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(npts: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; npts];
    let mut weights = vec![0.0; npts];
    let n = npts as f64;
    for i in 0..npts.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=npts {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[npts - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[npts - 1 - i] = w;
    }
    (nodes, weights)
}

/// Tensor of Gauss points over the nonempty elements of a knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub npts: usize,
    /// Element bounds `(left, right)`.
    pub elements: Vec<(f64, f64)>,
    /// All nodes, element by element.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn element_nodes(&self, e: usize) -> &[f64] {
        &self.nodes[e * self.npts..(e + 1) * self.npts]
    }

    pub fn element_weights(&self, e: usize) -> &[f64] {
        &self.weights[e * self.npts..(e + 1) * self.npts]
    }
}

/// Gauss-Legendre rule with `npts` nodes on every nonempty element.
pub fn element_quadrature(kv: &KnotVector, npts: usize) -> Result<QuadratureRule> {
    if npts < 1 {
        return Err(Error::InvalidArgument("need at least one quadrature point".into()));
    }
    let (ref_nodes, ref_weights) = gauss_legendre(npts);
    let elements: Vec<(f64, f64)> = kv.elements().iter().map(|&(l, r, _)| (l, r)).collect();
    let mut nodes = Vec::with_capacity(elements.len() * npts);
    let mut weights = Vec::with_capacity(elements.len() * npts);
    for &(l, r) in &elements {
        let (mid, half) = (0.5 * (l + r), 0.5 * (r - l));
        for (x, w) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    Ok(QuadratureRule {
        npts,
        elements,
        nodes,
        weights,
    })
}

/// Basis values and derivatives at a list of points, stored sparsely as
/// `p + 1` contiguous nonzeros per point.
#[derive(Debug, Clone)]
pub struct BasisTable {
    degree: usize,
    nbasis: usize,
    points: Vec<f64>,
    first: Vec<usize>,
    /// `values[k][q * (p + 1) + j]`: derivative `k` of basis `first[q] + j` at point `q`.
    values: Vec<Vec<f64>>,
}

impl BasisTable {
    pub fn at_points(kv: &KnotVector, points: &[f64], nderiv: usize) -> Result<Self> {
        let p = kv.degree;
        let mut first = Vec::with_capacity(points.len());
        let mut values = vec![Vec::with_capacity(points.len() * (p + 1)); nderiv + 1];
        for &x in points {
            let ev = eval_basis(kv, x, nderiv)?;
            first.push(ev.first_index());
            for (k, row) in ev.ders.iter().enumerate() {
                values[k].extend_from_slice(row);
            }
        }
        Ok(Self {
            degree: p,
            nbasis: kv.dim(),
            points: points.to_vec(),
            first,
            values,
        })
    }

    pub fn npoints(&self) -> usize {
        self.points.len()
    }

    pub fn nbasis(&self) -> usize {
        self.nbasis
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn max_order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Visits the nonzeros `(point, basis, value)` of derivative `order`.
    #[inline]
    pub fn for_each_nonzero<F: FnMut(usize, usize, f64)>(&self, order: usize, mut f: F) {
        let w = self.degree + 1;
        let vals = &self.values[order];
        for (q, &first) in self.first.iter().enumerate() {
            for j in 0..w {
                f(q, first + j, vals[q * w + j]);
            }
        }
    }

    /// First nonzero basis index at point `q` and the `p + 1` values of
    /// derivative `order` starting there.
    #[inline]
    pub fn point(&self, order: usize, q: usize) -> (usize, &[f64]) {
        let w = self.degree + 1;
        (self.first[q], &self.values[order][q * w..(q + 1) * w])
    }

    /// Value of derivative `order` of basis `i` at point `q`.
    pub fn value(&self, order: usize, q: usize, i: usize) -> f64 {
        let f = self.first[q];
        if i < f || i > f + self.degree {
            0.0
        } else {
            self.values[order][q * (self.degree + 1) + i - f]
        }
    }
}

/// Collocation matrix `C[q][i] = b_i(γ_q)` at the Greville abscissae.
pub fn greville_collocation(kv: &KnotVector) -> Result<BandMatrix<f64>> {
    let pts = greville_abscissae(kv);
    let table = BasisTable::at_points(kv, &pts, 0)?;
    let p = kv.degree;
    let mut c = BandMatrix::zeros(kv.dim(), p, p);
    table.for_each_nonzero(0, |q, i, v| {
        if v != 0.0 {
            c.set(q, i, v);
        }
    });
    Ok(c)
}
