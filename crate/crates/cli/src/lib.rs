//! Command-line frontend for the space-time Schrödinger solver.
//!
//! Every subcommand runs one family of experiments from `kronschro` and
//! writes a table of results as CSV or JSON. See [`run`] for exit codes.

pub mod config;
pub mod output;

use std::ffi::OsString;

use clap::Parser;
use kronschro::experiments::{
    condition_table, convergence_study, error_norms, extremes, infsup_constant_with, performance_run, solve_manufactured,
    spectral_equivalence_space, spectral_equivalence_time, study_problem, EigenRoute, InfSupMethod,
};
use serde::Serialize;

use config::{Cli, KindChoice, MethodChoice, Settings, Subcommand};
use output::{render, Sink};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Invalid flags, config file or output destination.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] kronschro::Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}

/// Parses `args` (program name first), runs the experiment and returns the
/// process exit code: 0 on success, 2 on a configuration error, 3 when
/// `solve` stops before reaching its tolerance, 1 otherwise.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let settings = match Settings::resolve(cli, std::env::var("KRONSCHRO_THREADS").ok()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}", RunError::from(e));
            return EXIT_CONFIG;
        }
    };
    match execute(&settings) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("warning: solver did not reach tol = {:e} in {} iterations", settings.tol, settings.maxit);
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs the experiment on a pool of `settings.threads` workers and writes
/// its output. Returns whether a `solve` run converged (always true for the
/// other subcommands).
pub fn execute(settings: &Settings) -> Result<bool, RunError> {
    let sink = Sink::open(settings.out.as_deref())
        .map_err(|e| ConfigError(format!("cannot open {}: {e}", settings.out.as_deref().unwrap_or("-".as_ref()).display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
        .map_err(|e| ConfigError(format!("cannot start {} threads: {e}", settings.threads)))?;
    let (bytes, converged) = pool.install(|| tabulate(settings))?;
    sink.write_all(&bytes)?;
    Ok(converged)
}

#[derive(Serialize)]
struct SolveRow {
    problem: String,
    p: usize,
    nel: usize,
    #[serde(rename = "Ndof")]
    n_dof: usize,
    iterations: usize,
    converged: bool,
    residual: f64,
    #[serde(rename = "errL2")]
    err_l2: f64,
    #[serde(rename = "errV")]
    err_v: f64,
    setup_s: f64,
    solve_s: f64,
}

#[derive(Serialize)]
struct ConvergenceRow {
    h: f64,
    #[serde(rename = "Ndof")]
    n_dof: usize,
    #[serde(rename = "errL2")]
    err_l2: f64,
    #[serde(rename = "errV")]
    err_v: f64,
    order: Option<f64>,
}

#[derive(Serialize)]
struct InfSupRow {
    method: &'static str,
    p: usize,
    nel: usize,
    alpha: f64,
}

#[derive(Serialize)]
struct SpectralRow {
    kind: &'static str,
    p: usize,
    nel: usize,
    lambda_min: f64,
    lambda_max: f64,
}

#[derive(Serialize)]
struct ConditionRow {
    p: usize,
    nel: usize,
    kappa2: f64,
}

#[derive(Serialize)]
struct PerfRow {
    problem: String,
    p: usize,
    nel: usize,
    prec: &'static str,
    iterations: usize,
    setup_s: f64,
    solve_s: f64,
    converged: bool,
}

fn tabulate(s: &Settings) -> Result<(Vec<u8>, bool), RunError> {
    let mut converged = true;
    let bytes = match s.subcommand {
        Subcommand::Solve => {
            let exact = s.problem()?;
            let solver = s.solver();
            let prob = study_problem(exact.as_ref(), s.p[0], s.nel[0], &solver)?;
            let sol = solve_manufactured(&prob, exact.as_ref(), &solver)?;
            let err = error_norms(&prob, &sol.coeffs, exact.as_ref())?;
            converged = sol.report.converged;
            let row = SolveRow {
                problem: exact.name().to_string(),
                p: s.p[0],
                nel: s.nel[0],
                n_dof: prob.n_dof(),
                iterations: sol.report.iterations,
                converged,
                residual: sol.report.final_residual(),
                err_l2: err.l2,
                err_v: err.v,
                setup_s: sol.setup_s,
                solve_s: sol.report.timings.total_s,
            };
            let header = [
                "problem", "p", "nel", "Ndof", "iters", "converged", "residual", "errL2", "errV", "setup_s", "solve_s",
            ];
            render(&[row], &header, s.format)?
        }
        Subcommand::Convergence => {
            let exact = s.problem()?;
            let rows: Vec<ConvergenceRow> = convergence_study(exact.as_ref(), s.p[0], &s.nel, &s.solver())?
                .into_iter()
                .map(|r| ConvergenceRow {
                    h: r.h,
                    n_dof: r.n_dof,
                    err_l2: r.errors.l2,
                    err_v: r.errors.v,
                    order: r.order_v,
                })
                .collect();
            render(&rows, &["h", "Ndof", "errL2", "errV", "order"], s.format)?
        }
        Subcommand::Infsup => {
            let methods: &[InfSupMethod] = match s.method {
                MethodChoice::Galerkin => &[InfSupMethod::Galerkin],
                MethodChoice::LeastSquares => &[InfSupMethod::LeastSquares],
                MethodChoice::Both => &[InfSupMethod::Galerkin, InfSupMethod::LeastSquares],
            };
            let mut rows = Vec::new();
            for &method in methods {
                for &p in &s.p {
                    for &nel in &s.nel {
                        let alpha = infsup_constant_with(method, p, nel, EigenRoute::Auto, s.seed)?;
                        rows.push(InfSupRow {
                            method: method.as_str(),
                            p,
                            nel,
                            alpha,
                        });
                    }
                }
            }
            render(&rows, &["method", "p", "nel", "alpha"], s.format)?
        }
        Subcommand::Spectral => {
            let kinds: &[&'static str] = match s.kind {
                KindChoice::Space => &["space"],
                KindChoice::Time => &["time"],
                KindChoice::Both => &["space", "time"],
            };
            let mut rows = Vec::new();
            for &kind in kinds {
                for &p in &s.p {
                    for &nel in &s.nel {
                        let vals = match kind {
                            "space" => spectral_equivalence_space(s.d.unwrap_or(1), p, nel)?,
                            _ => spectral_equivalence_time(p, nel)?,
                        };
                        let (lambda_min, lambda_max) = extremes(&vals);
                        rows.push(SpectralRow {
                            kind,
                            p,
                            nel,
                            lambda_min,
                            lambda_max,
                        });
                    }
                }
            }
            render(&rows, &["kind", "p", "nel", "lambda_min", "lambda_max"], s.format)?
        }
        Subcommand::Condtable => {
            let rows: Vec<ConditionRow> = condition_table(&s.p, &s.nel)?
                .into_iter()
                .map(|r| ConditionRow {
                    p: r.p,
                    nel: r.n_el,
                    kappa2: r.kappa2,
                })
                .collect();
            render(&rows, &["p", "nel", "kappa2"], s.format)?
        }
        Subcommand::Perf => {
            let exact = s.problem()?;
            let solver = s.solver();
            let mut rows = Vec::new();
            for &p in &s.p {
                for &nel in &s.nel {
                    let r = performance_run(exact.as_ref(), p, nel, &solver, s.warmup)?;
                    rows.push(PerfRow {
                        problem: r.problem,
                        p,
                        nel,
                        prec: r.precond.as_str(),
                        iterations: r.iterations,
                        setup_s: r.setup_s,
                        solve_s: r.solve_s,
                        converged: r.converged,
                    });
                }
            }
            let header = ["problem", "p", "nel", "prec", "iters", "setup_s", "solve_s", "converged"];
            render(&rows, &header, s.format)?
        }
    };
    Ok((bytes, converged))
}
