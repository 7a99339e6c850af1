//! Structural properties of the assembled operators and building blocks.

mod common;

use common::*;
use kronschro::assembly::{advection_matrix, assemble_system_operator, univariate_real, MatrixKind, Restriction, UnivariateMatrices};
use kronschro::bspline::eval_basis;
use kronschro::eigensolve::generalized_sym_eig;
use kronschro::fdsolver::{preconditioner_operator, time_block};
use kronschro::{FdPreconditioner, KnotVector, SpaceTimeProblem, C64};
use nalgebra::{DMatrix, SymmetricEigen};

fn hermitian_defect(a: &DMatrix<C64>) -> f64 {
    max_abs(&(a - a.adjoint())) / max_abs(a)
}

fn smallest_eigenvalue(a: &DMatrix<C64>) -> f64 {
    let h = (a + a.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn least_squares_operator_is_hermitian_positive_definite() {
    for (d, p, n_el, nu) in [(1, 2, 4, 1.0), (1, 4, 3, 0.3), (2, 2, 3, 1.0), (3, 2, 2, 2.0)] {
        let prob = SpaceTimeProblem::uniform(d, p, n_el, 1.0, nu).unwrap();
        let a = kron_dense(&assemble_system_operator(&prob).unwrap());
        assert!(hermitian_defect(&a) <= 1e-13, "d={d} p={p}");
        assert!(smallest_eigenvalue(&a) > 0.0, "d={d} p={p}");
    }
}

#[test]
fn preconditioner_and_time_blocks_are_hermitian_positive_definite() {
    for (d, p, n_el) in [(1, 3, 5), (2, 2, 3)] {
        let prob = SpaceTimeProblem::uniform(d, p, n_el, 1.0, 0.9).unwrap();
        let mats = UnivariateMatrices::assemble(&prob).unwrap();
        let ph = kron_dense(&preconditioner_operator(&mats, prob.nu()).unwrap());
        assert!(hermitian_defect(&ph) <= 1e-12);
        assert!(smallest_eigenvalue(&ph) > 0.0);
        let fd = FdPreconditioner::setup(&prob, &mats).unwrap();
        for &lam in fd.lambdas() {
            let h = time_block(&mats, prob.nu(), lam).to_dense();
            let h = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[[i, j]]);
            assert!(hermitian_defect(&h) <= 1e-13);
            assert!(smallest_eigenvalue(&h) > 0.0);
        }
    }
}

#[test]
fn advection_integrates_by_parts() {
    for p in [1, 2, 3, 5] {
        let kv = KnotVector::uniform(p, 6, 0.0, 2.0).unwrap();
        let w = advection_matrix(&kv, Restriction::None).unwrap().to_dense();
        let n = w.nrows();
        for i in 0..n {
            for j in 0..n {
                let jump = if i == j && i == n - 1 {
                    1.0
                } else if i == j && i == 0 {
                    -1.0
                } else {
                    0.0
                };
                let lhs = w[[i, j]] - w[[j, i]].conj();
                assert!((lhs - I * jump).norm() < 1e-12, "p={p} ({i},{j})");
            }
        }
        // on the initial-condition space only the final-time trace survives
        let w0 = advection_matrix(&kv, Restriction::DropFirst).unwrap().to_dense();
        let m = w0.nrows();
        let corner = w0[[m - 1, m - 1]] - w0[[m - 1, m - 1]].conj();
        assert!((corner - I).norm() < 1e-12);
    }
}

#[test]
fn second_derivative_matrix_is_minus_stiffness_with_dirichlet_conditions() {
    for p in [2, 3, 4] {
        let kv = KnotVector::uniform(p, 7, 0.0, 1.0).unwrap();
        let g = univariate_real(MatrixKind::SecondDerivative, &kv, Restriction::DropBoth).unwrap().to_dense();
        let l = univariate_real(MatrixKind::Stiffness, &kv, Restriction::DropBoth).unwrap().to_dense();
        let err = (&g + &l).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "p={p}: {err}");
        let gfull = univariate_real(MatrixKind::SecondDerivative, &kv, Restriction::None).unwrap().to_dense();
        let lfull = univariate_real(MatrixKind::Stiffness, &kv, Restriction::None).unwrap().to_dense();
        assert!((&gfull + &lfull).iter().any(|v| v.abs() > 1e-3));
    }
}

#[test]
fn basis_is_a_partition_of_unity() {
    for p in 1..=6 {
        let kv = KnotVector::uniform(p, 9, -1.0, 3.0).unwrap();
        for k in 0..=40 {
            let x = -1.0 + 4.0 * k as f64 / 40.0;
            let e = eval_basis(&kv, x, 1).unwrap();
            let s: f64 = e.ders[0].iter().sum();
            let ds: f64 = e.ders[1].iter().sum();
            assert!((s - 1.0).abs() < 1e-13 && ds.abs() < 1e-10, "p={p} x={x}");
            assert!(e.ders[0].iter().all(|&v| v >= -1e-15));
        }
    }
}

#[test]
fn eigendecomposition_residuals() {
    for p in [2, 3, 5, 8] {
        let kv = KnotVector::uniform(p, 40, 0.0, 1.0).unwrap();
        let l = univariate_real(MatrixKind::Stiffness, &kv, Restriction::DropBoth).unwrap();
        let m = univariate_real(MatrixKind::Mass, &kv, Restriction::DropBoth).unwrap();
        let e = generalized_sym_eig(&l, &m).unwrap();
        let (ld, md) = (l.to_dense(), m.to_dense());
        let u = &e.vectors;
        let lu = ld.dot(u);
        let mu = md.dot(u);
        let scale = e.values.iter().copied().fold(0.0, f64::max);
        for j in 0..u.ncols() {
            for i in 0..u.nrows() {
                assert!((lu[[i, j]] - e.values[j] * mu[[i, j]]).abs() <= 1e-10 * scale, "p={p}");
            }
        }
        let gram = u.t().dot(&mu);
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - target).abs() <= 1e-10, "p={p}");
            }
        }
    }
}
