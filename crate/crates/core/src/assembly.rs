//! Galerkin matrices, the space-time least-squares operator, load vectors,
//! lifting of nonhomogeneous data and the ultraweak variant.
//!
//! Coefficient tensors use axis 0 for time and axes `1..=d` for space. The
//! discrete trial space is selected by index ranges on the full univariate
//! bases: Dirichlet conditions drop the first and last spatial function, the
//! initial condition drops the first time function, the final condition the
//! last one.

use std::ops::Range;

use ndarray::Array2;
use rayon::prelude::*;

use crate::band::BandMatrix;
use crate::bspline::{element_quadrature, greville_abscissae, greville_collocation, BasisTable, KnotVector, QuadratureRule};
use crate::eigensolve::factor_banded;
use crate::error::{Error, Result};
use crate::tensorops::{kron_apply, mode_product, CoeffTensor, Factor, KroneckerOperator, KroneckerTerm, TableView, Transposed};
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Which end functions of a univariate basis are removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Restriction {
    None,
    DropFirst,
    DropLast,
    DropBoth,
}

impl Restriction {
    /// Kept indices of a basis with `m` functions.
    pub fn range(self, m: usize) -> Range<usize> {
        match self {
            Restriction::None => 0..m,
            Restriction::DropFirst => 1..m,
            Restriction::DropLast => 0..m.saturating_sub(1),
            Restriction::DropBoth => 1..m.saturating_sub(1).max(1),
        }
    }
}

/// Trial space in time: zero initial value or zero final value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeConvention {
    InitialCondition,
    FinalCondition,
}

impl TimeConvention {
    pub fn restriction(self) -> Restriction {
        match self {
            TimeConvention::InitialCondition => Restriction::DropFirst,
            TimeConvention::FinalCondition => Restriction::DropLast,
        }
    }
}

/// Univariate bilinear forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    /// `∫ b_j b_i`
    Mass,
    /// `∫ b'_j b'_i`
    Stiffness,
    /// `∫ b''_i b_j`
    SecondDerivative,
    /// `∫ b''_i b''_j`
    Bilaplacian,
    /// `i ∫ b'_j b_i`
    Advection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnivariateMatrix {
    Real(BandMatrix<f64>),
    Complex(BandMatrix<C64>),
}

/// `A_ij = ∫ b_i^(di) b_j^(dj)` on the full basis, by `p + 1` Gauss points per
/// element (exact for the polynomial integrands).
fn derivative_gram(kv: &KnotVector, di: usize, dj: usize) -> Result<BandMatrix<f64>> {
    let p = kv.degree();
    let rule = element_quadrature(kv, p + 1)?;
    let table = BasisTable::at_points(kv, &rule.nodes, di.max(dj))?;
    let mut a = BandMatrix::zeros(kv.dim(), p, p);
    for (q, &w) in rule.weights.iter().enumerate() {
        let (first, vi) = table.point(di, q);
        let (_, vj) = table.point(dj, q);
        for (a_i, &x) in vi.iter().enumerate() {
            for (a_j, &y) in vj.iter().enumerate() {
                a.add_to(first + a_i, first + a_j, w * x * y);
            }
        }
    }
    Ok(a)
}

fn require_c1(kv: &KnotVector) -> Result<()> {
    if kv.degree() < 2 || kv.continuity() < 1 {
        return Err(Error::InsufficientContinuity {
            continuity: kv.continuity(),
        });
    }
    Ok(())
}

fn restrict_band<T: crate::band::Scalar>(a: BandMatrix<T>, r: Restriction) -> BandMatrix<T> {
    let range = r.range(a.n());
    if range.start == 0 && range.end == a.n() {
        a
    } else {
        a.principal_submatrix(range.start, range.end)
    }
}

/// Real univariate matrix of the given kind on the restricted basis.
pub fn univariate_real(kind: MatrixKind, kv: &KnotVector, r: Restriction) -> Result<BandMatrix<f64>> {
    let a = match kind {
        MatrixKind::Mass => derivative_gram(kv, 0, 0)?,
        MatrixKind::Stiffness => derivative_gram(kv, 1, 1)?,
        MatrixKind::SecondDerivative => {
            require_c1(kv)?;
            derivative_gram(kv, 2, 0)?
        }
        MatrixKind::Bilaplacian => {
            require_c1(kv)?;
            derivative_gram(kv, 2, 2)?
        }
        MatrixKind::Advection => {
            return Err(Error::InvalidArgument("the advection matrix is complex".into()));
        }
    };
    Ok(restrict_band(a, r))
}

/// `W_ij = i ∫ b'_j b_i` on the restricted basis.
pub fn advection_matrix(kv: &KnotVector, r: Restriction) -> Result<BandMatrix<C64>> {
    let g = derivative_gram(kv, 0, 1)?;
    Ok(restrict_band(g.map(|v| I * v), r))
}

pub fn univariate_matrix(kind: MatrixKind, kv: &KnotVector, r: Restriction) -> Result<UnivariateMatrix> {
    match kind {
        MatrixKind::Advection => advection_matrix(kv, r).map(UnivariateMatrix::Complex),
        _ => univariate_real(kind, kv, r).map(UnivariateMatrix::Real),
    }
}

/// Discrete space-time problem on `(0,T) × (0,1)^d`.
#[derive(Debug, Clone)]
pub struct SpaceTimeProblem {
    time: KnotVector,
    space: Vec<KnotVector>,
    nu: f64,
    convention: TimeConvention,
    quad_points: Option<usize>,
}

impl SpaceTimeProblem {
    pub fn new(time: KnotVector, space: Vec<KnotVector>, nu: f64, convention: TimeConvention) -> Result<Self> {
        if space.is_empty() || space.len() > 3 {
            return Err(Error::InvalidArgument(format!(
                "spatial dimension {} not in 1..=3",
                space.len()
            )));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!("nu = {nu} must be positive")));
        }
        if time.start() != 0.0 {
            return Err(Error::InvalidArgument("time interval must start at 0".into()));
        }
        for kv in &space {
            require_c1(kv)?;
        }
        Ok(Self {
            time,
            space,
            nu,
            convention,
            quad_points: None,
        })
    }

    /// Same degree `p` and mesh size `1/n_el` in every direction; the time
    /// axis gets `round(T · n_el)` elements.
    pub fn uniform(d: usize, p: usize, n_el: usize, t_final: f64, nu: f64) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("T = {t_final} must be positive")));
        }
        let nt_el = ((t_final * n_el as f64).round() as usize).max(1);
        let time = KnotVector::uniform(p, nt_el, 0.0, t_final)?;
        let space = (0..d)
            .map(|_| KnotVector::uniform(p, n_el, 0.0, 1.0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(time, space, nu, TimeConvention::InitialCondition)
    }

    pub fn with_convention(mut self, convention: TimeConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Gauss points per element used for load vectors and error norms
    /// (default `p + 1` per direction).
    pub fn with_quad_points(mut self, npts: usize) -> Self {
        self.quad_points = Some(npts.max(1));
        self
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn final_time(&self) -> f64 {
        self.time.end()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn time(&self) -> &KnotVector {
        &self.time
    }

    pub fn space(&self) -> &[KnotVector] {
        &self.space
    }

    pub fn convention(&self) -> TimeConvention {
        self.convention
    }

    pub fn time_restriction(&self) -> Restriction {
        self.convention.restriction()
    }

    /// Knot vector of axis `k` (0 = time).
    pub fn axis(&self, k: usize) -> &KnotVector {
        if k == 0 {
            &self.time
        } else {
            &self.space[k - 1]
        }
    }

    pub fn quad_points(&self, axis: usize) -> usize {
        self.quad_points.unwrap_or(self.axis(axis).degree() + 1)
    }

    /// Sizes of the unrestricted univariate bases.
    pub fn full_dims(&self) -> Vec<usize> {
        std::iter::once(&self.time).chain(&self.space).map(|kv| kv.dim()).collect()
    }

    /// Kept index ranges per axis.
    pub fn free_ranges(&self) -> Vec<Range<usize>> {
        let mut r = vec![self.time_restriction().range(self.time.dim())];
        r.extend(self.space.iter().map(|kv| Restriction::DropBoth.range(kv.dim())));
        r
    }

    /// `(n_t, n_{s,1}, …, n_{s,d})`.
    pub fn dims(&self) -> Vec<usize> {
        self.free_ranges().iter().map(|r| r.len()).collect()
    }

    pub fn n_t(&self) -> usize {
        self.dims()[0]
    }

    pub fn n_s(&self) -> usize {
        self.dims()[1..].iter().product()
    }

    pub fn n_dof(&self) -> usize {
        self.dims().iter().product()
    }

    /// Largest element length over all directions.
    pub fn mesh_size(&self) -> f64 {
        std::iter::once(&self.time)
            .chain(&self.space)
            .map(|kv| kv.mesh_size())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct TimeMatrices {
    pub mass: BandMatrix<f64>,
    pub stiffness: BandMatrix<f64>,
    pub advection: BandMatrix<C64>,
}

impl TimeMatrices {
    /// `W + W*`.
    pub fn advection_sym(&self) -> BandMatrix<C64> {
        let wh = self.advection.conj_transpose();
        BandMatrix::combine(&[(C64::new(1.0, 0.0), &self.advection), (C64::new(1.0, 0.0), &wh)])
    }
}

#[derive(Debug, Clone)]
pub struct SpaceMatrices {
    pub mass: BandMatrix<f64>,
    pub stiffness: BandMatrix<f64>,
    /// `G_ij = ∫ b''_i b_j`.
    pub second: BandMatrix<f64>,
    pub bilaplacian: BandMatrix<f64>,
}

/// All univariate matrices of a problem, restricted to the trial space.
#[derive(Debug, Clone)]
pub struct UnivariateMatrices {
    pub time: TimeMatrices,
    pub space: Vec<SpaceMatrices>,
}

impl UnivariateMatrices {
    pub fn assemble(prob: &SpaceTimeProblem) -> Result<Self> {
        Self::assemble_restricted(prob, prob.time_restriction(), Restriction::DropBoth)
    }

    pub fn assemble_restricted(prob: &SpaceTimeProblem, time_r: Restriction, space_r: Restriction) -> Result<Self> {
        let kt = prob.time();
        let time = TimeMatrices {
            mass: univariate_real(MatrixKind::Mass, kt, time_r)?,
            stiffness: univariate_real(MatrixKind::Stiffness, kt, time_r)?,
            advection: advection_matrix(kt, time_r)?,
        };
        let space = prob
            .space()
            .par_iter()
            .map(|kv| {
                Ok(SpaceMatrices {
                    mass: univariate_real(MatrixKind::Mass, kv, space_r)?,
                    stiffness: univariate_real(MatrixKind::Stiffness, kv, space_r)?,
                    second: univariate_real(MatrixKind::SecondDerivative, kv, space_r)?,
                    bilaplacian: univariate_real(MatrixKind::Bilaplacian, kv, space_r)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { time, space })
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.time.mass.n())
            .chain(self.space.iter().map(|s| s.mass.n()))
            .collect()
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Spatial factors that are masses except at the listed axes.
fn masses_with(masses: &[Factor], replace: &[(usize, Factor)]) -> Vec<Factor> {
    let mut f = masses.to_vec();
    for (l, r) in replace {
        f[*l] = r.clone();
    }
    f
}

fn term(coeff: C64, time: Factor, space: Vec<Factor>) -> KroneckerTerm {
    let mut factors = Vec::with_capacity(space.len() + 1);
    factors.push(time);
    factors.extend(space);
    KroneckerTerm::new(coeff, factors)
}

/// `B_s ⊗ M_t` expanded over directions: bilaplacians on the diagonal and
/// `G_l`, `G_mᵀ` pairs off the diagonal.
fn bilaplacian_terms(mats: &UnivariateMatrices, masses: &[Factor], coeff: C64, mt: &Factor) -> Vec<KroneckerTerm> {
    let d = mats.space.len();
    let mut terms = Vec::new();
    for l in 0..d {
        let v = Factor::real(mats.space[l].bilaplacian.clone());
        terms.push(term(coeff, mt.clone(), masses_with(masses, &[(l, v)])));
    }
    for l in 0..d {
        for m in 0..d {
            if l != m {
                let g = Factor::real(mats.space[l].second.clone());
                let gt = Factor::real(mats.space[m].second.transpose());
                terms.push(term(coeff, mt.clone(), masses_with(masses, &[(l, g), (m, gt)])));
            }
        }
    }
    terms
}

fn spatial_masses(mats: &UnivariateMatrices) -> Vec<Factor> {
    mats.space.iter().map(|s| Factor::real(s.mass.clone())).collect()
}

/// `A = M_s⊗L_t + ν² B_s⊗M_t + ν L_s⊗(W+W*)`; valid when the spatial
/// restriction removes both end functions.
pub fn system_operator(mats: &UnivariateMatrices, nu: f64) -> Result<KroneckerOperator> {
    let d = mats.space.len();
    let ms = spatial_masses(mats);
    let lt = Factor::real(mats.time.stiffness.clone());
    let mt = Factor::real(mats.time.mass.clone());
    let wsym = Factor::complex(mats.time.advection_sym());
    let mut terms = vec![term(c(1.0), lt, ms.clone())];
    terms.extend(bilaplacian_terms(mats, &ms, c(nu * nu), &mt));
    for l in 0..d {
        let ls = Factor::real(mats.space[l].stiffness.clone());
        terms.push(term(c(nu), wsym.clone(), masses_with(&ms, &[(l, ls)])));
    }
    KroneckerOperator::new(mats.dims(), terms)
}

/// Least-squares operator of a problem on its trial space.
pub fn assemble_system_operator(prob: &SpaceTimeProblem) -> Result<KroneckerOperator> {
    system_operator(&UnivariateMatrices::assemble(prob)?, prob.nu())
}

/// Gram matrix of `{𝕊B_j}` on arbitrary index restrictions, written with the
/// mixed matrices `G_l` so that no boundary term is assumed to vanish:
/// `M_s⊗L_t + ν² B_s⊗M_t − ν Σ_l (G_l⊗W + G_lᵀ⊗W*)`.
pub fn gram_operator(prob: &SpaceTimeProblem, time_r: Restriction, space_r: Restriction) -> Result<KroneckerOperator> {
    let mats = UnivariateMatrices::assemble_restricted(prob, time_r, space_r)?;
    let nu = prob.nu();
    let d = mats.space.len();
    let ms = spatial_masses(&mats);
    let lt = Factor::real(mats.time.stiffness.clone());
    let mt = Factor::real(mats.time.mass.clone());
    let w = Factor::complex(mats.time.advection.clone());
    let wh = Factor::complex(mats.time.advection.conj_transpose());
    let mut terms = vec![term(c(1.0), lt, ms.clone())];
    terms.extend(bilaplacian_terms(&mats, &ms, c(nu * nu), &mt));
    for l in 0..d {
        let g = Factor::real(mats.space[l].second.clone());
        let gt = Factor::real(mats.space[l].second.transpose());
        terms.push(term(c(-nu), w.clone(), masses_with(&ms, &[(l, g)])));
        terms.push(term(c(-nu), wh.clone(), masses_with(&ms, &[(l, gt)])));
    }
    KroneckerOperator::new(mats.dims(), terms)
}

/// Space-time mass matrix `M_s ⊗ M_t`.
pub fn mass_operator(mats: &UnivariateMatrices) -> Result<KroneckerOperator> {
    let ms = spatial_masses(mats);
    let mt = Factor::real(mats.time.mass.clone());
    KroneckerOperator::new(mats.dims(), vec![term(c(1.0), mt, ms)])
}

/// Galerkin matrix `[(𝕊B_j, B_i)] = M_s⊗W − ν Σ_l Gᵀ_l⊗M_t` (test space equal
/// to the trial space).
pub fn galerkin_operator(mats: &UnivariateMatrices, nu: f64) -> Result<KroneckerOperator> {
    let d = mats.space.len();
    let ms = spatial_masses(mats);
    let mt = Factor::real(mats.time.mass.clone());
    let w = Factor::complex(mats.time.advection.clone());
    let mut terms = vec![term(c(1.0), w, ms.clone())];
    for l in 0..d {
        let gt = Factor::real(mats.space[l].second.transpose());
        terms.push(term(c(-nu), mt.clone(), masses_with(&ms, &[(l, gt)])));
    }
    KroneckerOperator::new(mats.dims(), terms)
}

/// A complex function of `(t, x)`.
pub trait SpaceTimeFunction: Sync {
    fn eval(&self, t: f64, x: &[f64]) -> C64;

    /// Values on the tensor grid `axes[0] × … × axes[d-1]` at time `t`, first
    /// axis fastest.
    fn eval_slab(&self, t: f64, axes: &[&[f64]], out: &mut [C64]) {
        let dims: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        let mut idx = vec![0usize; dims.len()];
        let mut x: Vec<f64> = axes.iter().map(|a| a.first().copied().unwrap_or(0.0)).collect();
        for o in out.iter_mut() {
            *o = self.eval(t, &x);
            for k in 0..dims.len() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    x[k] = axes[k][idx[k]];
                    break;
                }
                idx[k] = 0;
                x[k] = axes[k][0];
            }
        }
    }
}

impl<F: Fn(f64, &[f64]) -> C64 + Sync> SpaceTimeFunction for F {
    fn eval(&self, t: f64, x: &[f64]) -> C64 {
        self(t, x)
    }
}

/// Tensor Gauss rule with basis tables on every axis.
#[derive(Debug, Clone)]
pub struct QuadGrid {
    rules: Vec<QuadratureRule>,
    tables: Vec<BasisTable>,
}

impl QuadGrid {
    pub fn new(prob: &SpaceTimeProblem) -> Result<Self> {
        let axes = prob.dim() + 1;
        let mut rules = Vec::with_capacity(axes);
        let mut tables = Vec::with_capacity(axes);
        for k in 0..axes {
            let kv = prob.axis(k);
            let rule = element_quadrature(kv, prob.quad_points(k))?;
            let nderiv = if k == 0 { 1 } else { 2 };
            tables.push(BasisTable::at_points(kv, &rule.nodes, nderiv)?);
            rules.push(rule);
        }
        Ok(Self { rules, tables })
    }

    pub fn rule(&self, axis: usize) -> &QuadratureRule {
        &self.rules[axis]
    }

    pub fn table(&self, axis: usize) -> &BasisTable {
        &self.tables[axis]
    }

    pub fn dims(&self) -> Vec<usize> {
        self.rules.iter().map(|r| r.len()).collect()
    }

    pub fn space_axes(&self) -> Vec<&[f64]> {
        self.rules[1..].iter().map(|r| r.nodes.as_slice()).collect()
    }

    pub fn space_dims(&self) -> Vec<usize> {
        self.rules[1..].iter().map(|r| r.len()).collect()
    }

    /// Products of spatial weights, first spatial axis fastest.
    pub fn space_weights(&self) -> Vec<f64> {
        let mut w = vec![1.0];
        for r in &self.rules[1..] {
            let mut next = Vec::with_capacity(w.len() * r.len());
            for &wk in &r.weights {
                next.extend(w.iter().map(|&x| x * wk));
            }
            w = next;
        }
        w
    }
}

fn view<'a>(table: &'a BasisTable, order: usize, range: &Range<usize>) -> TableView<'a> {
    TableView {
        table,
        order,
        offset: range.start,
        ncols: range.len(),
    }
}

/// Spatial coefficients to values: derivative `orders[l]` along axis `l`.
fn eval_space(x: &CoeffTensor, grid: &QuadGrid, ranges: &[Range<usize>], orders: &[usize]) -> Result<CoeffTensor> {
    let mut cur = x.clone();
    for (l, (r, &o)) in ranges.iter().zip(orders).enumerate() {
        cur = mode_product(&cur, &view(grid.table(l + 1), o, r), l)?;
    }
    Ok(cur)
}

/// Weighted spatial values to moments against basis derivatives.
fn project_space(x: &CoeffTensor, grid: &QuadGrid, ranges: &[Range<usize>], orders: &[usize]) -> Result<CoeffTensor> {
    let mut cur = x.clone();
    for (l, (r, &o)) in ranges.iter().zip(orders).enumerate() {
        let v = view(grid.table(l + 1), o, r);
        cur = mode_product(&cur, &Transposed(&v), l)?;
    }
    Ok(cur)
}

fn unit_orders(d: usize, l: Option<usize>, order: usize) -> Vec<usize> {
    (0..d).map(|k| if Some(k) == l { order } else { 0 }).collect()
}

/// Weighted samples of `f` at each time node, projected onto the spatial
/// basis with orders all zero (`p0`) and summed Laplacian (`p2`).
struct SlabMoments {
    p0: Vec<C64>,
    p2: Vec<C64>,
}

fn spatial_moments<F: SpaceTimeFunction + ?Sized>(f: &F, grid: &QuadGrid, ranges: &[Range<usize>], need_laplacian: bool) -> Result<Vec<SlabMoments>> {
    let d = ranges.len();
    let sdims = grid.space_dims();
    let axes = grid.space_axes();
    let ws = grid.space_weights();
    let rt = grid.rule(0);
    (0..rt.len())
        .into_par_iter()
        .map(|q| {
            let (t, wt) = (rt.nodes[q], rt.weights[q]);
            let mut vals = vec![C64::new(0.0, 0.0); ws.len()];
            f.eval_slab(t, &axes, &mut vals);
            for (v, &w) in vals.iter_mut().zip(&ws) {
                *v *= w * wt;
            }
            let x = CoeffTensor::from_vec(&sdims, vals)?;
            let p0 = project_space(&x, grid, ranges, &unit_orders(d, None, 0))?.into_vec();
            let mut p2 = Vec::new();
            if need_laplacian {
                p2 = vec![C64::new(0.0, 0.0); p0.len()];
                for l in 0..d {
                    let y = project_space(&x, grid, ranges, &unit_orders(d, Some(l), 2))?;
                    for (a, b) in p2.iter_mut().zip(y.as_slice()) {
                        *a += b;
                    }
                }
            }
            Ok(SlabMoments { p0, p2 })
        })
        .collect()
}

/// Stacks per-time-node slabs into a tensor with time as axis 0.
fn stack_slabs(slabs: &[&[C64]], space_dims: &[usize]) -> Result<CoeffTensor> {
    let qt = slabs.len();
    let ns: usize = space_dims.iter().product();
    let mut data = vec![C64::new(0.0, 0.0); qt * ns];
    for (q, s) in slabs.iter().enumerate() {
        for (j, &v) in s.iter().enumerate() {
            data[q + qt * j] = v;
        }
    }
    let mut dims = vec![qt];
    dims.extend_from_slice(space_dims);
    CoeffTensor::from_vec(&dims, data)
}

/// `[f]_i = ∫_Q f · conj(𝕊B_i)` on the trial space, by sum factorization.
pub fn assemble_rhs<F: SpaceTimeFunction + ?Sized>(prob: &SpaceTimeProblem, f: &F) -> Result<Vec<C64>> {
    let grid = QuadGrid::new(prob)?;
    assemble_rhs_on(prob, &grid, f)
}

pub fn assemble_rhs_on<F: SpaceTimeFunction + ?Sized>(prob: &SpaceTimeProblem, grid: &QuadGrid, f: &F) -> Result<Vec<C64>> {
    let ranges = prob.free_ranges();
    let sdims: Vec<usize> = ranges[1..].iter().map(|r| r.len()).collect();
    let moments = spatial_moments(f, grid, &ranges[1..], true)?;
    let r0 = stack_slabs(&moments.iter().map(|m| m.p0.as_slice()).collect::<Vec<_>>(), &sdims)?;
    let r2 = stack_slabs(&moments.iter().map(|m| m.p2.as_slice()).collect::<Vec<_>>(), &sdims)?;
    let vt1 = view(grid.table(0), 1, &ranges[0]);
    let vt0 = view(grid.table(0), 0, &ranges[0]);
    let a = mode_product(&r0, &Transposed(&vt1), 0)?;
    let b = mode_product(&r2, &Transposed(&vt0), 0)?;
    let nu = prob.nu();
    Ok(a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| -I * x - nu * y)
        .collect())
}

/// Values of a discrete function and of its image under `𝕊` at the spatial
/// quadrature grid of one time node.
pub struct SlabValues<'a> {
    pub t: f64,
    pub weight: f64,
    pub u: &'a [C64],
    pub su: &'a [C64],
}

/// Evaluates the spline with coefficients `coeffs` (indexed by `ranges` of
/// the full bases) slab by slab and maps each slab through `visit`, in time
/// order.
pub fn map_time_slabs<R, V>(prob: &SpaceTimeProblem, grid: &QuadGrid, coeffs: &CoeffTensor, ranges: &[Range<usize>], visit: V) -> Result<Vec<R>>
where
    R: Send,
    V: Fn(&SlabValues) -> R + Sync,
{
    let d = prob.dim();
    let expect: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
    if coeffs.dims() != expect.as_slice() {
        return Err(Error::DimensionMismatch {
            expected: expect.iter().product(),
            found: coeffs.len(),
        });
    }
    let c0 = mode_product(coeffs, &view(grid.table(0), 0, &ranges[0]), 0)?;
    let c1 = mode_product(coeffs, &view(grid.table(0), 1, &ranges[0]), 0)?;
    let qt = c0.dims()[0];
    let sdims: Vec<usize> = expect[1..].to_vec();
    let ns: usize = sdims.iter().product();
    let nu = prob.nu();
    let rt = grid.rule(0);
    (0..qt)
        .into_par_iter()
        .map(|q| {
            let gather = |src: &CoeffTensor| -> Result<CoeffTensor> {
                let s = src.as_slice();
                CoeffTensor::from_vec(&sdims, (0..ns).map(|j| s[q + qt * j]).collect())
            };
            let s0 = gather(&c0)?;
            let s1 = gather(&c1)?;
            let sr = &ranges[1..];
            let u = eval_space(&s0, grid, sr, &unit_orders(d, None, 0))?.into_vec();
            let dt = eval_space(&s1, grid, sr, &unit_orders(d, None, 0))?.into_vec();
            let mut su: Vec<C64> = dt.iter().map(|&z| I * z).collect();
            for l in 0..d {
                let lap = eval_space(&s0, grid, sr, &unit_orders(d, Some(l), 2))?;
                for (a, &b) in su.iter_mut().zip(lap.as_slice()) {
                    *a -= nu * b;
                }
            }
            Ok(visit(&SlabValues {
                t: rt.nodes[q],
                weight: rt.weights[q],
                u: &u,
                su: &su,
            }))
        })
        .collect()
}

/// Entries of `full` at the index box `ranges`.
pub fn restrict(full: &CoeffTensor, ranges: &[Range<usize>]) -> Result<CoeffTensor> {
    if ranges.len() != full.dims().len() || ranges.iter().zip(full.dims()).any(|(r, &n)| r.end > n) {
        return Err(Error::InvalidArgument("index ranges do not fit the tensor".into()));
    }
    let dims: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
    let mut out = CoeffTensor::zeros(&dims);
    let fd = full.dims().to_vec();
    for_each_box_index(&dims, |lin, idx| {
        let src = idx
            .iter()
            .zip(ranges)
            .zip(&fd)
            .rev()
            .fold(0, |acc, ((&i, r), &n)| acc * n + i + r.start);
        out.as_mut_slice()[lin] = full.as_slice()[src];
    });
    Ok(out)
}

/// Places `reduced` at the index box `ranges` of a zero tensor of `full_dims`.
pub fn extend(reduced: &CoeffTensor, full_dims: &[usize], ranges: &[Range<usize>]) -> Result<CoeffTensor> {
    let dims: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
    if reduced.dims() != dims.as_slice() || ranges.iter().zip(full_dims).any(|(r, &n)| r.end > n) {
        return Err(Error::InvalidArgument("index ranges do not fit the tensor".into()));
    }
    let mut out = CoeffTensor::zeros(full_dims);
    for_each_box_index(&dims, |lin, idx| {
        let dst = idx
            .iter()
            .zip(ranges)
            .zip(full_dims)
            .rev()
            .fold(0, |acc, ((&i, r), &n)| acc * n + i + r.start);
        out.as_mut_slice()[dst] = reduced.as_slice()[lin];
    });
    Ok(out)
}

fn for_each_box_index<F: FnMut(usize, &[usize])>(dims: &[usize], mut f: F) {
    let n: usize = dims.iter().product();
    let mut idx = vec![0usize; dims.len()];
    for lin in 0..n {
        f(lin, &idx);
        for k in 0..dims.len() {
            idx[k] += 1;
            if idx[k] < dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn inverse_collocation(kv: &KnotVector) -> Result<Array2<f64>> {
    let c = greville_collocation(kv)?;
    let lu = factor_banded(&c)?;
    let m = kv.dim();
    let mut inv = Array2::zeros((m, m));
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        lu.solve_in_place(&mut e)?;
        for (i, v) in e.into_iter().enumerate() {
            inv[[i, j]] = v;
        }
    }
    Ok(inv)
}

/// Tensor-product spline interpolant of `g` at the Greville points of the
/// full bases.
pub fn interpolate<F: SpaceTimeFunction + ?Sized>(prob: &SpaceTimeProblem, g: &F) -> Result<CoeffTensor> {
    let kvs: Vec<&KnotVector> = (0..=prob.dim()).map(|k| prob.axis(k)).collect();
    let pts: Vec<Vec<f64>> = kvs.iter().map(|kv| greville_abscissae(kv)).collect();
    let space_axes: Vec<&[f64]> = pts[1..].iter().map(|v| v.as_slice()).collect();
    let ns: usize = space_axes.iter().map(|a| a.len()).product();
    let slabs: Vec<Vec<C64>> = pts[0]
        .par_iter()
        .map(|&t| {
            let mut out = vec![C64::new(0.0, 0.0); ns];
            g.eval_slab(t, &space_axes, &mut out);
            out
        })
        .collect();
    let sdims: Vec<usize> = pts[1..].iter().map(|v| v.len()).collect();
    let mut x = stack_slabs(&slabs.iter().map(|s| s.as_slice()).collect::<Vec<_>>(), &sdims)?;
    for (axis, kv) in kvs.iter().enumerate() {
        x = mode_product(&x, &inverse_collocation(kv)?, axis)?;
    }
    Ok(x)
}

/// Boundary lift and the load vector corrected for it.
#[derive(Debug, Clone)]
pub struct Lifting {
    /// Coefficients on the full bases; zero at every free index.
    pub boundary: CoeffTensor,
    pub rhs: Vec<C64>,
}

/// Interpolates `g` at the Greville points, keeps the coefficients of the
/// constrained (boundary and initial or final) functions, and subtracts their
/// contribution from the load vector of `f`.
pub fn lift_nonhomogeneous<G, F>(prob: &SpaceTimeProblem, g: &G, f: &F) -> Result<Lifting>
where
    G: SpaceTimeFunction + ?Sized,
    F: SpaceTimeFunction + ?Sized,
{
    let rhs = assemble_rhs(prob, f)?;
    lift_with_rhs(prob, g, rhs)
}

pub fn lift_with_rhs<G: SpaceTimeFunction + ?Sized>(prob: &SpaceTimeProblem, g: &G, mut rhs: Vec<C64>) -> Result<Lifting> {
    let ranges = prob.free_ranges();
    let full = interpolate(prob, g)?;
    let free_part = extend(&restrict(&full, &ranges)?, full.dims(), &ranges)?;
    let boundary_data: Vec<C64> = full.as_slice().iter().zip(free_part.as_slice()).map(|(a, b)| a - b).collect();
    let boundary = CoeffTensor::from_vec(full.dims(), boundary_data)?;
    if boundary.as_slice().iter().any(|z| *z != C64::new(0.0, 0.0)) {
        let a_full = gram_operator(prob, Restriction::None, Restriction::None)?;
        let au = CoeffTensor::from_vec(full.dims(), kron_apply(&a_full, boundary.as_slice())?)?;
        let correction = restrict(&au, &ranges)?;
        for (r, x) in rhs.iter_mut().zip(correction.as_slice()) {
            *r -= x;
        }
    }
    Ok(Lifting { boundary, rhs })
}

/// Ultraweak system on the final-condition space: the least-squares operator
/// of that space and the load `∫ f B_i + i ∫_Ω u₀ B_i(·, 0)`. `u0` is read at
/// `t = 0`. The discrete solution is `𝕊` applied to the computed spline.
pub fn assemble_ultraweak<F, U>(prob: &SpaceTimeProblem, f: &F, u0: &U) -> Result<(KroneckerOperator, Vec<C64>)>
where
    F: SpaceTimeFunction + ?Sized,
    U: SpaceTimeFunction + ?Sized,
{
    if prob.convention() != TimeConvention::FinalCondition {
        return Err(Error::InvalidArgument(
            "the ultraweak system needs the final-condition trial space".into(),
        ));
    }
    let op = assemble_system_operator(prob)?;
    let grid = QuadGrid::new(prob)?;
    let ranges = prob.free_ranges();
    let sdims: Vec<usize> = ranges[1..].iter().map(|r| r.len()).collect();
    let moments = spatial_moments(f, &grid, &ranges[1..], false)?;
    let r0 = stack_slabs(&moments.iter().map(|m| m.p0.as_slice()).collect::<Vec<_>>(), &sdims)?;
    let mut rhs = mode_product(&r0, &Transposed(&view(grid.table(0), 0, &ranges[0])), 0)?.into_vec();

    // initial datum against B_i(·, 0); only the first time function is nonzero at 0
    let ws = grid.space_weights();
    let mut vals = vec![C64::new(0.0, 0.0); ws.len()];
    u0.eval_slab(0.0, &grid.space_axes(), &mut vals);
    for (v, &w) in vals.iter_mut().zip(&ws) {
        *v *= w;
    }
    let x = CoeffTensor::from_vec(&grid.space_dims(), vals)?;
    let m0 = project_space(&x, &grid, &ranges[1..], &unit_orders(prob.dim(), None, 0))?;
    let nt = ranges[0].len();
    for (j, &v) in m0.as_slice().iter().enumerate() {
        rhs[nt * j] += I * v;
    }
    Ok((op, rhs))
}
