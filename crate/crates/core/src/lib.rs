//! Space-time least-squares isogeometric discretization of the linear
//! Schrödinger equation `i ∂_t u − ν Δu = f` on `(0,T) × (0,1)^d`.
//!
//! The discrete operator is kept as a sum of Kronecker products of banded
//! univariate matrices and applied matrix-free. Linear systems are solved by
//! preconditioned conjugate gradients with a fast-diagonalization
//! preconditioner that diagonalizes the spatial pencils and solves one banded
//! time problem per spatial eigenvalue.
//!
//! Module map:
//!
//! * [`bspline`]: knot vectors, basis evaluation, Greville points, quadrature.
//! * [`tensorops`]: coefficient tensors, mode products, Kronecker operators.
//! * [`assembly`]: univariate Galerkin matrices, system operator, load vectors,
//!   lifting of nonhomogeneous data and the ultraweak variant.
//! * [`eigensolve`]: generalized symmetric eigenproblems, banded LU, dense
//!   Hermitian pencils.
//! * [`fdsolver`]: the fast-diagonalization preconditioner.
//! * [`krylov`]: preconditioned conjugate gradients.
//! * [`problems`]: manufactured solutions.
//! * [`experiments`]: error norms, convergence, stability and performance
//!   studies.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod band;
pub mod bspline;
pub mod eigensolve;
pub mod error;
pub mod experiments;
pub mod fdsolver;
pub mod krylov;
pub mod problems;
pub mod tensorops;

pub use assembly::{SpaceTimeProblem, TimeConvention};
pub use band::BandMatrix;
pub use bspline::{KnotVector, QuadratureRule};
pub use error::{Error, Result};
pub use fdsolver::FdPreconditioner;
pub use krylov::{pcg, PcgOptions, SolveReport, StopMode};
pub use problems::ManufacturedSolution;
pub use tensorops::{CoeffTensor, KroneckerOperator};

/// Complex scalar used for all space-time coefficients.
pub type C64 = num_complex::Complex64;
