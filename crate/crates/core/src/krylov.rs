//! Preconditioned conjugate gradients for Hermitian positive definite
//! systems, with inner product `⟨u, v⟩ = Σ u_i conj(v_i)`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::C64;

/// Which residual the stopping test reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopMode {
    /// Recursively updated residual; the true residual is confirmed at exit
    /// and, if it is still too large, replaces the recursive one.
    #[default]
    Recurrence,
    /// True residual `b - A x` every iteration (one extra product each).
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    pub tol: f64,
    pub maxit: usize,
    pub mode: StopMode,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            maxit: 200,
            mode: StopMode::Recurrence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveTimings {
    pub setup_s: f64,
    pub matvec_s: f64,
    pub precond_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<C64>,
    pub iterations: usize,
    /// `‖b − A x_k‖ / ‖b‖` at checkpoints `(k, value)`; always includes the
    /// start and the final iterate.
    pub history: Vec<(usize, f64)>,
    /// Recursive residual estimate after every iteration.
    pub recurrence_history: Vec<f64>,
    pub converged: bool,
    pub timings: SolveTimings,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.history.last().map(|h| h.1).unwrap_or(0.0)
    }
}

fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

fn norm(u: &[C64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `A x = b` from `x = 0`.
pub fn pcg<A, P>(mut apply_a: A, mut apply_p: P, b: &[C64], opts: &PcgOptions) -> Result<SolveReport>
where
    A: FnMut(&[C64]) -> Result<Vec<C64>>,
    P: FnMut(&[C64]) -> Result<Vec<C64>>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let start = Instant::now();
    let n = b.len();
    let mut timings = SolveTimings::default();
    let mut x = vec![C64::new(0.0, 0.0); n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        timings.total_s = start.elapsed().as_secs_f64();
        return Ok(SolveReport {
            x,
            iterations: 0,
            history: vec![(0, 0.0)],
            recurrence_history: vec![],
            converged: true,
            timings,
        });
    }

    let mut timed_a = |v: &[C64], t: &mut SolveTimings| -> Result<Vec<C64>> {
        let s = Instant::now();
        let y = apply_a(v)?;
        t.matvec_s += s.elapsed().as_secs_f64();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        Ok(y)
    };
    let mut timed_p = |v: &[C64], t: &mut SolveTimings| -> Result<Vec<C64>> {
        let s = Instant::now();
        let y = apply_p(v)?;
        t.precond_s += s.elapsed().as_secs_f64();
        Ok(y)
    };

    let mut r = b.to_vec();
    let mut z = timed_p(&r, &mut timings)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    let mut history = vec![(0, 1.0)];
    let mut recurrence_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let true_residual = |x: &[C64], t: &mut SolveTimings, a: &mut dyn FnMut(&[C64], &mut SolveTimings) -> Result<Vec<C64>>| -> Result<(Vec<C64>, f64)> {
        let ax = a(x, t)?;
        let res: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rel = norm(&res) / bnorm;
        Ok((res, rel))
    };

    for k in 1..=opts.maxit {
        if !(rz > 0.0) {
            return Err(Error::Breakdown {
                iteration: k,
                curvature: rz,
            });
        }
        let q = timed_a(&p, &mut timings)?;
        let pq = dot(&p, &q).re;
        if !(pq > 0.0) {
            return Err(Error::Breakdown {
                iteration: k,
                curvature: pq,
            });
        }
        let alpha = rz / pq;
        for ((xi, ri), (pi, qi)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&q)) {
            *xi += alpha * pi;
            *ri -= alpha * qi;
        }
        iterations = k;
        let rec = norm(&r) / bnorm;
        recurrence_history.push(rec);
        match opts.mode {
            StopMode::Strict => {
                let (_, rel) = true_residual(&x, &mut timings, &mut timed_a)?;
                history.push((k, rel));
                if rel <= opts.tol {
                    converged = true;
                    break;
                }
            }
            StopMode::Recurrence => {
                if rec <= opts.tol {
                    let (res, rel) = true_residual(&x, &mut timings, &mut timed_a)?;
                    history.push((k, rel));
                    if rel <= opts.tol {
                        converged = true;
                        break;
                    }
                    r = res;
                }
            }
        }
        z = timed_p(&r, &mut timings)?;
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    if !converged && history.last().map(|h| h.0) != Some(iterations) {
        let (_, rel) = true_residual(&x, &mut timings, &mut timed_a)?;
        history.push((iterations, rel));
        converged = rel <= opts.tol;
    }
    timings.total_s = start.elapsed().as_secs_f64();
    Ok(SolveReport {
        x,
        iterations,
        history,
        recurrence_history,
        converged,
        timings,
    })
}
