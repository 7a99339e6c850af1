//! Fast-diagonalization preconditioner
//! `P̂ = M̂_s⊗L_t + ν² L̂_s M̂_s⁻¹ L̂_s⊗M_t + ν L̂_s⊗(W+W*)`.
//!
//! With `L̂_l U_l = M̂_l U_l Λ_l` in every spatial direction, `P̂` becomes
//! block diagonal in the spatial eigenbasis, one banded time block
//! `H_i = L_t + ν²λ_i² M_t + ν λ_i (W+W*)` per composite eigenvalue
//! `λ_i = Σ_l Λ_l[i_l]`.

use ndarray::Array2;
use rayon::prelude::*;

use crate::assembly::{SpaceTimeProblem, UnivariateMatrices};
use crate::band::BandMatrix;
use crate::eigensolve::{factor_banded, generalized_sym_eig, BandedFactorization, GeneralizedEigenDecomposition};
use crate::error::{Error, Result};
use crate::tensorops::{mode_product, multi_index, CoeffTensor, Factor, KroneckerOperator, KroneckerTerm, Transposed};
use crate::C64;

#[derive(Debug, Clone)]
pub struct FdPreconditioner {
    dims: Vec<usize>,
    nu: f64,
    eig: Vec<GeneralizedEigenDecomposition>,
    lambdas: Vec<f64>,
    blocks: Vec<BandedFactorization<C64>>,
}

/// Time block `L_t + ν²λ² M_t + νλ (W+W*)`.
pub fn time_block(mats: &UnivariateMatrices, nu: f64, lambda: f64) -> BandMatrix<C64> {
    let lt = mats.time.stiffness.map(|v| C64::new(v, 0.0));
    let mt = mats.time.mass.map(|v| C64::new(v, 0.0));
    let ws = mats.time.advection_sym();
    BandMatrix::combine(&[
        (C64::new(1.0, 0.0), &lt),
        (C64::new(nu * nu * lambda * lambda, 0.0), &mt),
        (C64::new(nu * lambda, 0.0), &ws),
    ])
}

impl FdPreconditioner {
    /// Spatial eigendecompositions and factorization of every time block.
    pub fn setup(prob: &SpaceTimeProblem, mats: &UnivariateMatrices) -> Result<Self> {
        let dims = mats.dims();
        if dims != prob.dims() {
            return Err(Error::DimensionMismatch {
                expected: prob.n_dof(),
                found: dims.iter().product(),
            });
        }
        let nu = prob.nu();
        let eig = mats
            .space
            .par_iter()
            .map(|s| generalized_sym_eig(&s.stiffness, &s.mass))
            .collect::<Result<Vec<_>>>()?;
        let sdims = &dims[1..];
        let ns: usize = sdims.iter().product();
        let lambdas: Vec<f64> = (0..ns)
            .map(|j| {
                multi_index(sdims, j)
                    .iter()
                    .zip(&eig)
                    .map(|(&i, e)| e.values[i])
                    .sum()
            })
            .collect();
        let blocks = lambdas
            .par_iter()
            .map(|&lam| factor_banded(&time_block(mats, nu, lam)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dims,
            nu,
            eig,
            lambdas,
            blocks,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    /// Composite spatial eigenvalues in `vec` order of the spatial axes.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn decompositions(&self) -> &[GeneralizedEigenDecomposition] {
        &self.eig
    }

    /// `P̂⁻¹ r`.
    pub fn apply(&self, r: &[C64]) -> Result<Vec<C64>> {
        let n = self.size();
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.len(),
            });
        }
        let mut x = CoeffTensor::from_vec(&self.dims, r.to_vec())?;
        for (l, e) in self.eig.iter().enumerate() {
            x = mode_product(&x, &Transposed(&e.vectors), l + 1)?;
        }
        let nt = self.dims[0];
        let mut data = x.into_vec();
        data.par_chunks_mut(nt)
            .zip(self.blocks.par_iter())
            .try_for_each(|(chunk, f)| f.solve_in_place(chunk))?;
        let mut x = CoeffTensor::from_vec(&self.dims, data)?;
        for (l, e) in self.eig.iter().enumerate() {
            x = mode_product(&x, &e.vectors, l + 1)?;
        }
        Ok(x.into_vec())
    }
}

pub fn fd_setup(prob: &SpaceTimeProblem, mats: &UnivariateMatrices) -> Result<FdPreconditioner> {
    FdPreconditioner::setup(prob, mats)
}

pub fn fd_apply(p: &FdPreconditioner, r: &[C64]) -> Result<Vec<C64>> {
    p.apply(r)
}

/// `L M⁻¹ L` as a full-band matrix, via banded LU of `M`.
fn stiffness_mass_stiffness(l: &BandMatrix<f64>, m: &BandMatrix<f64>) -> Result<BandMatrix<f64>> {
    let n = l.n();
    let lu = factor_banded(m)?;
    let ld = l.to_dense();
    let mut minv_l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let col = lu.solve(&ld.column(j).to_vec())?;
        for (i, v) in col.into_iter().enumerate() {
            minv_l[[i, j]] = v;
        }
    }
    let prod = ld.dot(&minv_l);
    let sym = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (prod[[i, j]] + prod[[j, i]]));
    Ok(BandMatrix::from_dense(&sym, n.saturating_sub(1), n.saturating_sub(1)))
}

/// Spatial Kronecker expansion of `L̂_s M̂_s⁻¹ L̂_s`: `L_l M_l⁻¹ L_l` terms on
/// the diagonal, `L_l`, `L_m` pairs off it, masses elsewhere.
pub fn spatial_surrogate_factors(mats: &UnivariateMatrices) -> Result<Vec<Vec<Factor>>> {
    let d = mats.space.len();
    let masses: Vec<Factor> = mats.space.iter().map(|s| Factor::real(s.mass.clone())).collect();
    let mut out = Vec::new();
    for l in 0..d {
        let mut f = masses.clone();
        f[l] = Factor::real(stiffness_mass_stiffness(&mats.space[l].stiffness, &mats.space[l].mass)?);
        out.push(f);
    }
    for l in 0..d {
        for m in 0..d {
            if l != m {
                let mut f = masses.clone();
                f[l] = Factor::real(mats.space[l].stiffness.clone());
                f[m] = Factor::real(mats.space[m].stiffness.clone());
                out.push(f);
            }
        }
    }
    Ok(out)
}

/// `P̂` itself as a Kronecker operator (dense spatial blocks; for checks).
pub fn preconditioner_operator(mats: &UnivariateMatrices, nu: f64) -> Result<KroneckerOperator> {
    let d = mats.space.len();
    let masses: Vec<Factor> = mats.space.iter().map(|s| Factor::real(s.mass.clone())).collect();
    let lt = Factor::real(mats.time.stiffness.clone());
    let mt = Factor::real(mats.time.mass.clone());
    let ws = Factor::complex(mats.time.advection_sym());
    let with_time = |c: f64, t: &Factor, s: Vec<Factor>| {
        let mut f = vec![t.clone()];
        f.extend(s);
        KroneckerTerm::new(C64::new(c, 0.0), f)
    };
    let mut terms = vec![with_time(1.0, &lt, masses.clone())];
    for s in spatial_surrogate_factors(mats)? {
        terms.push(with_time(nu * nu, &mt, s));
    }
    for l in 0..d {
        let mut s = masses.clone();
        s[l] = Factor::real(mats.space[l].stiffness.clone());
        terms.push(with_time(nu, &ws, s));
    }
    KroneckerOperator::new(mats.dims(), terms)
}
