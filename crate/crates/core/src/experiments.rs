//! Error norms and the numerical studies: convergence under refinement,
//! discrete inf-sup constants, spectral equivalence of the preconditioner
//! ingredients, eigenvector conditioning and solver performance.

use std::time::Instant;

use ndarray::Array2;

use crate::assembly::{
    assemble_rhs, extend, galerkin_operator, lift_nonhomogeneous, map_time_slabs, mass_operator, system_operator, QuadGrid,
    Restriction, SpaceTimeProblem, UnivariateMatrices,
};
use crate::band::BandMatrix;
use crate::bspline::KnotVector;
use crate::eigensolve::{
    cholesky, cholesky_solve, cond2_eigvec, dense_hermitian_geneig, dense_sym_geneig, factor_banded, lanczos_largest, PENCIL_CAP,
};
use crate::error::{Error, Result};
use crate::fdsolver::{spatial_surrogate_factors, FdPreconditioner};
use crate::krylov::{pcg, PcgOptions, SolveReport};
use crate::problems::{Exact, Forcing, ManufacturedSolution};
use crate::tensorops::{kron_apply, kron_to_banded, kron_to_dense_capped, CoeffTensor, Factor, KroneckerOperator, KroneckerTerm};
use crate::assembly::advection_matrix;
use crate::assembly::{univariate_real, MatrixKind};
use crate::C64;

/// `‖u − u_h‖_{L²(Q)}`, `‖𝕊(u − u_h)‖_{L²(Q)}` and the V-norm combining both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub residual: f64,
    pub v: f64,
}

/// Errors of the spline with full-basis coefficients `coeffs` (boundary lift
/// included) against `exact`, by tensor Gauss quadrature.
pub fn error_norms<M: ManufacturedSolution + ?Sized>(prob: &SpaceTimeProblem, coeffs: &CoeffTensor, exact: &M) -> Result<ErrorNorms> {
    let grid = QuadGrid::new(prob)?;
    let ranges: Vec<_> = prob.full_dims().into_iter().map(|m| 0..m).collect();
    let ws = grid.space_weights();
    let axes = grid.space_axes();
    let parts = map_time_slabs(prob, &grid, coeffs, &ranges, |s| {
        let mut u = vec![C64::new(0.0, 0.0); ws.len()];
        let mut f = vec![C64::new(0.0, 0.0); ws.len()];
        exact.u_slab(s.t, &axes, &mut u);
        exact.f_slab(s.t, &axes, &mut f);
        let mut e0 = 0.0;
        let mut e1 = 0.0;
        for k in 0..ws.len() {
            e0 += ws[k] * (u[k] - s.u[k]).norm_sqr();
            e1 += ws[k] * (f[k] - s.su[k]).norm_sqr();
        }
        (s.weight * e0, s.weight * e1)
    })?;
    let (l2sq, ressq) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(ErrorNorms {
        l2: l2sq.sqrt(),
        residual: ressq.sqrt(),
        v: (l2sq + ressq).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrecondKind {
    #[default]
    Fd,
    None,
}

impl PrecondKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PrecondKind::Fd => "fd",
            PrecondKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverSettings {
    pub pcg: PcgOptions,
    pub precond: PrecondKind,
    /// Gauss points per element for load vectors and error norms.
    pub quad_points: Option<usize>,
}

/// PCG tolerance of convergence studies. At `1e-8` the algebraic error
/// overtakes the discretization error of `p ≥ 3` on fine meshes.
pub const STUDY_TOLERANCE: f64 = 1e-12;

impl SolverSettings {
    /// FD-preconditioned PCG at [`STUDY_TOLERANCE`].
    pub fn for_studies() -> Self {
        Self {
            pcg: PcgOptions {
                tol: STUDY_TOLERANCE,
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

/// Computed spline with solver diagnostics.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    /// Coefficients on the full bases, boundary lift included.
    pub coeffs: CoeffTensor,
    pub report: SolveReport,
    pub assembly_s: f64,
    pub setup_s: f64,
}

/// Problem with the mesh of a study level.
pub fn study_problem<M: ManufacturedSolution + ?Sized>(exact: &M, p: usize, n_el: usize, settings: &SolverSettings) -> Result<SpaceTimeProblem> {
    let prob = SpaceTimeProblem::uniform(exact.dim(), p, n_el, exact.final_time(), exact.nu())?;
    Ok(match settings.quad_points {
        Some(q) => prob.with_quad_points(q),
        None => prob,
    })
}

/// Assembles and solves the least-squares system of `exact` on `prob`.
pub fn solve_manufactured<M: ManufacturedSolution + ?Sized>(prob: &SpaceTimeProblem, exact: &M, settings: &SolverSettings) -> Result<DiscreteSolution> {
    if prob.dim() != exact.dim() {
        return Err(Error::DimensionMismatch {
            expected: prob.dim(),
            found: exact.dim(),
        });
    }
    let t0 = Instant::now();
    let mats = UnivariateMatrices::assemble(prob)?;
    let op = system_operator(&mats, prob.nu())?;
    let (boundary, rhs) = if exact.homogeneous() {
        (CoeffTensor::zeros(&prob.full_dims()), assemble_rhs(prob, &Forcing(exact))?)
    } else {
        let lift = lift_nonhomogeneous(prob, &Exact(exact), &Forcing(exact))?;
        (lift.boundary, lift.rhs)
    };
    let assembly_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let fd = match settings.precond {
        PrecondKind::Fd => Some(FdPreconditioner::setup(prob, &mats)?),
        PrecondKind::None => None,
    };
    let setup_s = t1.elapsed().as_secs_f64();
    let mut report = pcg(
        |v| kron_apply(&op, v),
        |r| match &fd {
            Some(p) => p.apply(r),
            None => Ok(r.to_vec()),
        },
        &rhs,
        &settings.pcg,
    )?;
    report.timings.setup_s = setup_s;
    let x = CoeffTensor::from_vec(&prob.dims(), report.x.clone())?;
    let free = extend(&x, &prob.full_dims(), &prob.free_ranges())?;
    let data: Vec<C64> = boundary.as_slice().iter().zip(free.as_slice()).map(|(a, b)| a + b).collect();
    Ok(DiscreteSolution {
        coeffs: CoeffTensor::from_vec(&prob.full_dims(), data)?,
        report,
        assembly_s,
        setup_s,
    })
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub n_el: usize,
    pub h: f64,
    pub n_dof: usize,
    pub errors: ErrorNorms,
    /// Observed V-norm order against the previous level.
    pub order_v: Option<f64>,
    pub order_l2: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `log(e_prev / e) / log(h_prev / h)`.
pub fn observed_order(e_prev: f64, e: f64, h_prev: f64, h: f64) -> Option<f64> {
    if e_prev > 0.0 && e > 0.0 && h_prev != h {
        Some((e_prev / e).ln() / (h_prev / h).ln())
    } else {
        None
    }
}

pub fn convergence_study<M: ManufacturedSolution + ?Sized>(exact: &M, p: usize, n_els: &[usize], settings: &SolverSettings) -> Result<Vec<ConvergenceRecord>> {
    let mut out: Vec<ConvergenceRecord> = Vec::with_capacity(n_els.len());
    for &n_el in n_els {
        let prob = study_problem(exact, p, n_el, settings)?;
        let sol = solve_manufactured(&prob, exact, settings)?;
        let errors = error_norms(&prob, &sol.coeffs, exact)?;
        let h = prob.mesh_size();
        let (order_v, order_l2) = match out.last() {
            Some(prev) => (
                observed_order(prev.errors.v, errors.v, prev.h, h),
                observed_order(prev.errors.l2, errors.l2, prev.h, h),
            ),
            None => (None, None),
        };
        out.push(ConvergenceRecord {
            n_el,
            h,
            n_dof: prob.n_dof(),
            errors,
            order_v,
            order_l2,
            iterations: sol.report.iterations,
            converged: sol.report.converged,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfSupMethod {
    Galerkin,
    LeastSquares,
}

impl InfSupMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            InfSupMethod::Galerkin => "galerkin",
            InfSupMethod::LeastSquares => "least_squares",
        }
    }
}

/// How smallest pencil eigenvalues are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenRoute {
    /// Dense Cholesky reduction; limited to [`PENCIL_CAP`].
    Dense,
    /// Lanczos on the inverse pencil with banded LU solves.
    Lanczos,
    /// Dense up to [`AUTO_DENSE_LIMIT`] unknowns, Lanczos above.
    Auto,
}

pub const AUTO_DENSE_LIMIT: usize = 600;

/// Operators of the 1D inf-sup pencils on `(0,1) × (0,1)` with `ν = 1`.
struct InfSupOperators {
    ls: KroneckerOperator,
    mass: KroneckerOperator,
    galerkin: KroneckerOperator,
    gram_v: KroneckerOperator,
}

fn sum_operators(a: &KroneckerOperator, b: &KroneckerOperator) -> Result<KroneckerOperator> {
    let mut terms: Vec<KroneckerTerm> = a.terms().to_vec();
    terms.extend(b.terms().iter().cloned());
    KroneckerOperator::new(a.dims().to_vec(), terms)
}

fn infsup_operators(p: usize, n_el: usize) -> Result<InfSupOperators> {
    let prob = SpaceTimeProblem::uniform(1, p, n_el, 1.0, 1.0)?;
    let mats = UnivariateMatrices::assemble(&prob)?;
    let ls = system_operator(&mats, 1.0)?;
    let mass = mass_operator(&mats)?;
    let galerkin = galerkin_operator(&mats, 1.0)?;
    let gram_v = sum_operators(&mass, &ls)?;
    Ok(InfSupOperators {
        ls,
        mass,
        galerkin,
        gram_v,
    })
}

/// Discrete inf-sup constant `α_h` of the Galerkin or least-squares method in
/// one space dimension, `T = 1`, `ν = 1`, equal degree and mesh in space and
/// time.
pub fn infsup_constant(method: InfSupMethod, p: usize, n_el: usize) -> Result<f64> {
    infsup_constant_with(method, p, n_el, EigenRoute::Auto, 0)
}

pub fn infsup_constant_with(method: InfSupMethod, p: usize, n_el: usize, route: EigenRoute, seed: u64) -> Result<f64> {
    let ops = infsup_operators(p, n_el)?;
    let n = ops.ls.size();
    let dense = match route {
        EigenRoute::Dense => true,
        EigenRoute::Lanczos => false,
        EigenRoute::Auto => n <= AUTO_DENSE_LIMIT,
    };
    let lambda = if dense {
        infsup_dense(&ops, method)?
    } else {
        infsup_lanczos(&ops, method, seed)?
    };
    Ok(lambda.max(0.0).sqrt())
}

fn symmetrize(a: &Array2<C64>) -> Array2<C64> {
    Array2::from_shape_fn(a.dim(), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]].conj()))
}

fn infsup_dense(ops: &InfSupOperators, method: InfSupMethod) -> Result<f64> {
    let gv = kron_to_dense_capped(&ops.gram_v, PENCIL_CAP)?;
    let k = match method {
        InfSupMethod::LeastSquares => kron_to_dense_capped(&ops.ls, PENCIL_CAP)?,
        InfSupMethod::Galerkin => {
            let ag = kron_to_dense_capped(&ops.galerkin, PENCIL_CAP)?;
            let mq = kron_to_dense_capped(&ops.mass, PENCIL_CAP)?;
            let c = cholesky(&mq)?;
            let y = cholesky_solve(&c, &ag);
            let agh = ag.t().mapv(|z| z.conj());
            agh.dot(&y)
        }
    };
    let vals = dense_hermitian_geneig(&symmetrize(&k), &symmetrize(&gv))?;
    Ok(vals[0])
}

fn infsup_lanczos(ops: &InfSupOperators, method: InfSupMethod, seed: u64) -> Result<f64> {
    let n = ops.ls.size();
    let apply_g = |x: &[C64]| kron_apply(&ops.gram_v, x);
    let max_steps = n.min(600);
    let theta = match method {
        InfSupMethod::LeastSquares => {
            let lu = factor_banded(&kron_to_banded(&ops.ls))?;
            lanczos_largest(n, |x| lu.solve(&kron_apply(&ops.gram_v, x)?), apply_g, seed, max_steps, 1e-10)?
        }
        InfSupMethod::Galerkin => {
            let lu = match factor_banded(&kron_to_banded(&ops.galerkin)) {
                Ok(f) => f,
                Err(Error::SingularPivot { .. }) => return Ok(0.0),
                Err(e) => return Err(e),
            };
            lanczos_largest(
                n,
                |x| {
                    let g = kron_apply(&ops.gram_v, x)?;
                    let y = lu.solve_adjoint(&g)?;
                    let m = kron_apply(&ops.mass, &y)?;
                    lu.solve(&m)
                },
                apply_g,
                seed,
                max_steps,
                1e-10,
            )?
        }
    };
    if !(theta > 0.0) || !theta.is_finite() {
        return Ok(0.0);
    }
    Ok(1.0 / theta)
}

/// Spatial pencil matrices `B̂_s` and `L̂_s M̂_s⁻¹ L̂_s` as dense real arrays.
fn space_pencil(d: usize, p: usize, n_el: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let prob = SpaceTimeProblem::uniform(d, p, n_el, 1.0, 1.0)?;
    let mats = UnivariateMatrices::assemble(&prob)?;
    let sdims: Vec<usize> = mats.space.iter().map(|s| s.mass.n()).collect();
    let masses: Vec<Factor> = mats.space.iter().map(|s| Factor::real(s.mass.clone())).collect();
    let mut bterms = Vec::new();
    for l in 0..d {
        let mut f = masses.clone();
        f[l] = Factor::real(mats.space[l].bilaplacian.clone());
        bterms.push(KroneckerTerm::new(C64::new(1.0, 0.0), f));
        for m in 0..d {
            if m != l {
                let mut f = masses.clone();
                f[l] = Factor::real(mats.space[l].second.clone());
                f[m] = Factor::real(mats.space[m].second.transpose());
                bterms.push(KroneckerTerm::new(C64::new(1.0, 0.0), f));
            }
        }
    }
    let sterms = spatial_surrogate_factors(&mats)?
        .into_iter()
        .map(|f| KroneckerTerm::new(C64::new(1.0, 0.0), f))
        .collect();
    let b = kron_to_dense_capped(&KroneckerOperator::new(sdims.clone(), bterms)?, PENCIL_CAP)?;
    let s = kron_to_dense_capped(&KroneckerOperator::new(sdims, sterms)?, PENCIL_CAP)?;
    Ok((b.mapv(|z| z.re), s.mapv(|z| z.re)))
}

/// Eigenvalues (ascending) of `(L̂_s M̂_s⁻¹ L̂_s)⁻¹ B̂_s` on `(0,1)^d`.
pub fn spectral_equivalence_space(d: usize, p: usize, n_el: usize) -> Result<Vec<f64>> {
    let (b, s) = space_pencil(d, p, n_el)?;
    let bs = Array2::from_shape_fn(b.dim(), |(i, j)| 0.5 * (b[[i, j]] + b[[j, i]]));
    let ss = Array2::from_shape_fn(s.dim(), |(i, j)| 0.5 * (s[[i, j]] + s[[j, i]]));
    Ok(dense_sym_geneig(&bs, &ss, false)?.values)
}

/// Eigenvalues (ascending) of `(W* M̂_t⁻¹ W)⁻¹ L̂_t` on the initial-condition
/// space over `(0,1)`. Computed from the reciprocal pencil, whose right side
/// `L̂_t` is positive definite; a zero reciprocal maps to `+∞`.
pub fn spectral_equivalence_time(p: usize, n_el: usize) -> Result<Vec<f64>> {
    let kv = KnotVector::uniform(p, n_el, 0.0, 1.0)?;
    let r = Restriction::DropFirst;
    let l = univariate_real(MatrixKind::Stiffness, &kv, r)?.to_dense().mapv(|v| C64::new(v, 0.0));
    let m = univariate_real(MatrixKind::Mass, &kv, r)?.to_dense().mapv(|v| C64::new(v, 0.0));
    let w = advection_matrix(&kv, r)?.to_dense();
    let c = cholesky(&m)?;
    let y = cholesky_solve(&c, &w);
    let b = w.t().mapv(|z| z.conj()).dot(&y);
    let mu = dense_hermitian_geneig(&symmetrize(&b), &l)?;
    let mut lambda: Vec<f64> = mu.iter().map(|&v| if v > 0.0 { 1.0 / v } else { f64::INFINITY }).collect();
    lambda.sort_by(|a, b| a.total_cmp(b));
    Ok(lambda)
}

/// Smallest and largest entries of an ascending list.
pub fn extremes(vals: &[f64]) -> (f64, f64) {
    (vals[0], vals[vals.len() - 1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionRow {
    pub p: usize,
    pub n_el: usize,
    pub kappa2: f64,
}

/// `κ₂(U) = √κ₂(M̂)` of the spatial eigenvector matrix with Dirichlet
/// conditions on `(0,1)`.
pub fn eigvec_condition(p: usize, n_el: usize) -> Result<f64> {
    let kv = KnotVector::uniform(p, n_el, 0.0, 1.0)?;
    let m: BandMatrix<f64> = univariate_real(MatrixKind::Mass, &kv, Restriction::DropBoth)?;
    cond2_eigvec(&m)
}

pub fn condition_table(ps: &[usize], n_els: &[usize]) -> Result<Vec<ConditionRow>> {
    let mut rows = Vec::new();
    for &p in ps {
        for &n_el in n_els {
            rows.push(ConditionRow {
                p,
                n_el,
                kappa2: eigvec_condition(p, n_el)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerfRecord {
    pub problem: String,
    pub p: usize,
    pub n_el: usize,
    pub n_dof: usize,
    pub precond: PrecondKind,
    pub iterations: usize,
    pub setup_s: f64,
    pub solve_s: f64,
    pub converged: bool,
    pub final_residual: f64,
}

/// Solves once (after an optional untimed warm-up run) and records the
/// iteration count and wall-clock times of preconditioner setup and PCG.
pub fn performance_run<M: ManufacturedSolution + ?Sized>(exact: &M, p: usize, n_el: usize, settings: &SolverSettings, warmup: bool) -> Result<PerfRecord> {
    let prob = study_problem(exact, p, n_el, settings)?;
    if warmup {
        solve_manufactured(&prob, exact, settings)?;
    }
    let sol = solve_manufactured(&prob, exact, settings)?;
    Ok(PerfRecord {
        problem: exact.name().to_string(),
        p,
        n_el,
        n_dof: prob.n_dof(),
        precond: settings.precond,
        iterations: sol.report.iterations,
        setup_s: sol.setup_s,
        solve_s: sol.report.timings.total_s,
        converged: sol.report.converged,
        final_residual: sol.report.final_residual(),
    })
}
