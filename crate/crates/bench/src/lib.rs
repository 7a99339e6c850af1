//! Shared fixtures for the benchmarks.

use kronschro::assembly::{system_operator, UnivariateMatrices};
use kronschro::{FdPreconditioner, KroneckerOperator, SpaceTimeProblem, C64};

/// Operator, preconditioner and a deterministic right-hand side for one mesh.
pub struct Fixture {
    pub problem: SpaceTimeProblem,
    pub operator: KroneckerOperator,
    pub precond: FdPreconditioner,
    pub rhs: Vec<C64>,
}

impl Fixture {
    pub fn new(d: usize, p: usize, n_el: usize) -> kronschro::Result<Self> {
        let problem = SpaceTimeProblem::uniform(d, p, n_el, 1.0, 1.0)?;
        let mats = UnivariateMatrices::assemble(&problem)?;
        let operator = system_operator(&mats, problem.nu())?;
        let precond = FdPreconditioner::setup(&problem, &mats)?;
        let rhs = (0..problem.n_dof())
            .map(|k| {
                let s = k as f64;
                C64::new((0.37 * s).sin(), (0.11 * s).cos())
            })
            .collect();
        Ok(Self {
            problem,
            operator,
            precond,
            rhs,
        })
    }
}
