//! Assembled and matrix-free quantities against independent references.

mod common;

use common::*;
use kronschro::assembly::{
    assemble_rhs, assemble_system_operator, assemble_ultraweak, extend, gram_operator, map_time_slabs, system_operator, QuadGrid,
    Restriction, UnivariateMatrices,
};
use kronschro::band::BandMatrix;
use kronschro::experiments::{error_norms, solve_manufactured, SolverSettings};
use kronschro::fdsolver::preconditioner_operator;
use kronschro::krylov::StopMode;
use kronschro::problems::Forcing;
use kronschro::tensorops::{kron_apply, Factor, KroneckerTerm};
use kronschro::{pcg, CoeffTensor, FdPreconditioner, KroneckerOperator, PcgOptions, SpaceTimeProblem, TimeConvention, C64};
use nalgebra::DVector;

fn banded(n: usize, kl: usize, ku: usize, seed: f64) -> BandMatrix<C64> {
    let mut m = BandMatrix::zeros(n, kl, ku);
    for i in 0..n {
        for j in m.row_range(i) {
            let s = seed + (i * 7 + j * 3) as f64;
            m.set(i, j, C64::new(s.sin(), (0.5 * s).cos()));
        }
    }
    m
}

#[test]
fn matrix_free_product_matches_explicit_kronecker() {
    let dims = vec![4, 3, 5];
    let terms = vec![
        KroneckerTerm::new(
            C64::new(1.0, 0.5),
            vec![Factor::complex(banded(4, 1, 2, 0.1)), Factor::complex(banded(3, 1, 1, 0.2)), Factor::complex(banded(5, 2, 1, 0.3))],
        ),
        KroneckerTerm::new(C64::new(-0.3, 0.0), vec![Factor::Identity, Factor::complex(banded(3, 2, 2, 0.9)), Factor::Identity]),
    ];
    let op = KroneckerOperator::new(dims, terms).unwrap();
    let v = sample_vector(op.size(), 0.3);
    let fast = kron_apply(&op, &v).unwrap();
    let slow = kron_dense(&op) * DVector::from_vec(v);
    assert!(max_diff(&fast, slow.as_slice()) <= 1e-12);
}

#[test]
fn least_squares_matrix_matches_space_time_quadrature() {
    for (d, nu) in [(1, 0.8), (2, 1.0)] {
        let prob = SpaceTimeProblem::uniform(d, 2, 2, 1.0, nu).unwrap();
        let a = kron_dense(&assemble_system_operator(&prob).unwrap());
        let q = gram_by_quadrature(&prob, &prob.free_ranges(), 5);
        let err = max_abs(&(a - &q)) / max_abs(&q);
        assert!(err <= 1e-12, "d={d}: {err}");
    }
}

#[test]
fn final_condition_matrix_matches_quadrature() {
    let prob = SpaceTimeProblem::uniform(1, 3, 2, 1.0, 0.6)
        .unwrap()
        .with_convention(TimeConvention::FinalCondition);
    let a = kron_dense(&assemble_system_operator(&prob).unwrap());
    let q = gram_by_quadrature(&prob, &prob.free_ranges(), 6);
    assert!(max_abs(&(a - &q)) / max_abs(&q) <= 1e-12);
}

#[test]
fn mixed_form_matches_quadrature_without_boundary_conditions() {
    let prob = SpaceTimeProblem::uniform(1, 2, 2, 1.0, 0.9).unwrap();
    let a = kron_dense(&gram_operator(&prob, Restriction::None, Restriction::None).unwrap());
    let ranges: Vec<_> = prob.full_dims().into_iter().map(|m| 0..m).collect();
    let q = gram_by_quadrature(&prob, &ranges, 5);
    assert!(max_abs(&(a - &q)) / max_abs(&q) <= 1e-12);
}

#[test]
fn mixed_form_equals_symmetric_form_on_trial_space() {
    for d in [1, 2] {
        let prob = SpaceTimeProblem::uniform(d, 3, 3, 1.0, 1.3).unwrap();
        let a = kron_dense(&assemble_system_operator(&prob).unwrap());
        let g = kron_dense(&gram_operator(&prob, Restriction::DropFirst, Restriction::DropBoth).unwrap());
        assert!(max_abs(&(a - g)) <= 1e-10, "d={d}");
    }
}

#[test]
fn load_vector_matches_space_time_quadrature() {
    let prob = SpaceTimeProblem::uniform(2, 2, 2, 1.0, 0.7).unwrap().with_quad_points(6);
    let f = |t: f64, x: &[f64]| C64::new((t + x[0]).cos(), x[1] * t) * (1.0 + x[0] * x[1]);
    let b = assemble_rhs(&prob, &f).unwrap();
    let q = moments_by_quadrature(&prob, f, true, 6);
    let scale = q.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(max_diff(&b, &q) <= 1e-12 * scale);
}

#[test]
fn fast_diagonalization_matches_dense_solve() {
    for (d, p, n_el) in [(1, 3, 6), (2, 2, 4)] {
        let prob = SpaceTimeProblem::uniform(d, p, n_el, 1.0, 0.8).unwrap();
        let mats = UnivariateMatrices::assemble(&prob).unwrap();
        let fd = FdPreconditioner::setup(&prob, &mats).unwrap();
        let p_hat = kron_dense(&preconditioner_operator(&mats, prob.nu()).unwrap());
        let r = sample_vector(prob.n_dof(), 1.1);
        let dense = p_hat.lu().solve(&DVector::from_vec(r.clone())).unwrap();
        let fast = fd.apply(&r).unwrap();
        let scale = dense.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_diff(&fast, dense.as_slice()) <= 1e-10 * scale.max(1.0), "d={d}");
    }
}

#[test]
fn exact_inverse_preconditioner_converges_in_one_step() {
    let prob = SpaceTimeProblem::uniform(1, 3, 4, 1.0, 1.0).unwrap();
    let op = assemble_system_operator(&prob).unwrap();
    let inv = kron_dense(&op).try_inverse().unwrap();
    let b = sample_vector(prob.n_dof(), 2.0);
    for mode in [StopMode::Recurrence, StopMode::Strict] {
        let opts = PcgOptions {
            mode,
            ..Default::default()
        };
        let rep = pcg(
            |v| kron_apply(&op, v),
            |r| Ok((&inv * DVector::from_vec(r.to_vec())).as_slice().to_vec()),
            &b,
            &opts,
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }
}

#[test]
fn solution_in_discrete_space_is_reproduced() {
    let exact = quadratic_bubble(1.0);
    let prob = SpaceTimeProblem::uniform(1, 2, 3, 1.0, 1.0).unwrap();
    let settings = SolverSettings {
        pcg: PcgOptions {
            tol: 1e-13,
            ..Default::default()
        },
        ..Default::default()
    };
    let sol = solve_manufactured(&prob, &exact, &settings).unwrap();
    let e = error_norms(&prob, &sol.coeffs, &exact).unwrap();
    assert!(e.l2 <= 1e-9 && e.v <= 1e-9, "{e:?}");
}

#[test]
fn lifted_solution_in_discrete_space_is_reproduced() {
    let exact = shifted_quadratic(0.5);
    for p in [2, 3] {
        let prob = SpaceTimeProblem::uniform(1, p, 4, 1.0, 0.5).unwrap();
        let settings = SolverSettings {
            pcg: PcgOptions {
                tol: 1e-13,
                ..Default::default()
            },
            ..Default::default()
        };
        let sol = solve_manufactured(&prob, &exact, &settings).unwrap();
        let e = error_norms(&prob, &sol.coeffs, &exact).unwrap();
        assert!(e.l2 <= 1e-9 && e.v <= 1e-9, "p={p}: {e:?}");
    }
}

#[test]
fn zero_coefficients_measure_the_solution() {
    let exact = Closed {
        d: 1,
        t_final: 1.0,
        nu: 1.0,
        homogeneous: true,
        u: |t, x, _| C64::new(t * (std::f64::consts::PI * x[0]).sin(), 0.0),
        f: |t, x, nu| {
            let s = (std::f64::consts::PI * x[0]).sin();
            I * s + nu * std::f64::consts::PI.powi(2) * t * s
        },
    };
    let prob = SpaceTimeProblem::uniform(1, 3, 8, 1.0, 1.0).unwrap();
    let zero = CoeffTensor::zeros(&prob.full_dims());
    let e = error_norms(&prob, &zero, &exact).unwrap();
    assert!((e.l2 - (1.0f64 / 6.0).sqrt()).abs() < 1e-6, "{}", e.l2);
    assert!(e.v >= e.l2);
}

fn ultraweak_data() -> (fn(f64, &[f64]) -> C64, fn(f64, &[f64]) -> C64) {
    // u = exp(i t) sin(πx) (1 + t), f = i ∂_t u − Δu
    fn u(t: f64, x: &[f64]) -> C64 {
        let s = (std::f64::consts::PI * x[0]).sin();
        C64::from_polar(1.0, t) * s * (1.0 + t)
    }
    fn f(t: f64, x: &[f64]) -> C64 {
        let pi2 = std::f64::consts::PI.powi(2);
        let s = (std::f64::consts::PI * x[0]).sin();
        let e = C64::from_polar(1.0, t);
        I * e * s * (I * (1.0 + t) + 1.0) + pi2 * e * s * (1.0 + t)
    }
    (u, f)
}

#[test]
fn ultraweak_load_is_the_adjoint_pairing() {
    let (u, f) = ultraweak_data();
    let prob = SpaceTimeProblem::uniform(1, 3, 3, 1.0, 1.0)
        .unwrap()
        .with_convention(TimeConvention::FinalCondition)
        .with_quad_points(10);
    let (_, rhs) = assemble_ultraweak(&prob, &f, &u).unwrap();
    let pairing = moments_by_quadrature(&prob, u, true, 10);
    let scale = pairing.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(max_diff(&rhs, &pairing) <= 1e-9 * scale);
}

#[test]
fn ultraweak_solution_converges() {
    let (u, f) = ultraweak_data();
    let mut errs = Vec::new();
    for n_el in [4, 8, 16] {
        let prob = SpaceTimeProblem::uniform(1, 3, n_el, 1.0, 1.0)
            .unwrap()
            .with_convention(TimeConvention::FinalCondition);
        let (op, rhs) = assemble_ultraweak(&prob, &f, &u).unwrap();
        let mats = UnivariateMatrices::assemble(&prob).unwrap();
        let fd = FdPreconditioner::setup(&prob, &mats).unwrap();
        let opts = PcgOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let rep = pcg(|v| kron_apply(&op, v), |r| fd.apply(r), &rhs, &opts).unwrap();
        assert!(rep.converged);
        let w = CoeffTensor::from_vec(&prob.dims(), rep.x).unwrap();
        let w = extend(&w, &prob.full_dims(), &prob.free_ranges()).unwrap();
        let grid = QuadGrid::new(&prob).unwrap();
        let all: Vec<_> = prob.full_dims().into_iter().map(|m| 0..m).collect();
        let axes = grid.space_axes();
        let ws = grid.space_weights();
        let parts = map_time_slabs(&prob, &grid, &w, &all, |s| {
            let mut acc = 0.0;
            for (k, x) in axes[0].iter().enumerate() {
                acc += ws[k] * (u(s.t, &[*x]) - s.su[k]).norm_sqr();
            }
            s.weight * acc
        })
        .unwrap();
        errs.push(parts.iter().sum::<f64>().sqrt());
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[1] / errs[2] > 4.0 && errs[2] < 1e-2, "{errs:?}");
}

#[test]
fn manufactured_load_matches_forcing_adapter() {
    let g = kronschro::problems::gaussian_1d();
    let prob = SpaceTimeProblem::uniform(1, 2, 3, 2.0, 1.0).unwrap();
    let b = assemble_rhs(&prob, &Forcing(&g)).unwrap();
    let q = moments_by_quadrature(&prob, |t, x| kronschro::ManufacturedSolution::f(&g, t, x), true, 3);
    let scale = q.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(max_diff(&b, &q) <= 1e-12 * scale);
}

#[test]
fn operator_of_matrices_equals_problem_operator() {
    let prob = SpaceTimeProblem::uniform(1, 2, 4, 1.0, 0.4).unwrap();
    let mats = UnivariateMatrices::assemble(&prob).unwrap();
    let a = kron_dense(&system_operator(&mats, prob.nu()).unwrap());
    let b = kron_dense(&assemble_system_operator(&prob).unwrap());
    assert_eq!(a, b);
}
