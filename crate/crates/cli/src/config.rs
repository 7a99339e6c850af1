//! Command-line flags, the JSON run file, and their merge into validated
//! settings. Flags override the file; the file overrides built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use kronschro::experiments::{PrecondKind, SolverSettings, STUDY_TOLERANCE};
use kronschro::krylov::StopMode;
use kronschro::problems::{gaussian_1d, high_mode_1d, traveling_wave};
use kronschro::{ManufacturedSolution, PcgOptions};
use serde::Deserialize;

use crate::ConfigError;

pub const DEFAULT_MODES: usize = 625;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    /// Solve one manufactured problem and report errors and solver data.
    Solve,
    /// Errors and observed orders under uniform refinement.
    Convergence,
    /// Discrete inf-sup constants of the Galerkin and least-squares methods.
    Infsup,
    /// Extreme eigenvalues of the space and time preconditioner pencils.
    Spectral,
    /// Condition numbers of the spatial eigenvector matrices.
    Condtable,
    /// Iteration counts and timings of preconditioned CG.
    Perf,
}

impl Subcommand {
    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::Convergence => "convergence",
            Subcommand::Infsup => "infsup",
            Subcommand::Spectral => "spectral",
            Subcommand::Condtable => "condtable",
            Subcommand::Perf => "perf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prec {
    Fd,
    None,
}

impl From<Prec> for PrecondKind {
    fn from(p: Prec) -> Self {
        match p {
            Prec::Fd => PrecondKind::Fd,
            Prec::None => PrecondKind::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Galerkin,
    #[value(name = "least_squares")]
    LeastSquares,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindChoice {
    Space,
    Time,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "kronschro", version, about = "Space-time least-squares spline solver for the Schrödinger equation")]
pub struct Cli {
    /// Experiment to run; may instead come from the config file.
    #[arg(value_enum)]
    pub subcommand: Option<Subcommand>,

    /// JSON run file with the same keys as the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// gaussian1d, highmode1d, wave1d, wave2d, wave3d or wave (with --d).
    #[arg(long)]
    pub problem: Option<String>,

    /// Space dimension (wave problems and spectral space pencils).
    #[arg(long)]
    pub d: Option<usize>,

    /// Spline degree(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<usize>>,

    /// Elements per unit length, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub nel: Option<Vec<usize>>,

    /// Final time (overrides the problem's own).
    #[arg(long = "T")]
    pub t_final: Option<f64>,

    /// Coefficient ν (overrides the problem's own).
    #[arg(long)]
    pub nu: Option<f64>,

    /// Relative residual tolerance of CG.
    #[arg(long)]
    pub tol: Option<f64>,

    #[arg(long)]
    pub maxit: Option<usize>,

    #[arg(long, value_enum)]
    pub prec: Option<Prec>,

    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Seed of randomized start vectors.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads, 0 for automatic. Falls back to KRONSCHRO_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Number of modes of the high-mode problem.
    #[arg(long)]
    pub modes: Option<usize>,

    #[arg(long, value_enum)]
    pub method: Option<MethodChoice>,

    #[arg(long, value_enum)]
    pub kind: Option<KindChoice>,

    /// Stop CG on the true residual, computed every iteration.
    #[arg(long)]
    pub strict: bool,

    /// Skip the untimed warm-up solve of `perf`.
    #[arg(long)]
    pub no_warmup: bool,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<Subcommand>,
    pub problem: Option<String>,
    pub d: Option<usize>,
    pub p: Option<Vec<usize>>,
    pub nel: Option<Vec<usize>>,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub nu: Option<f64>,
    pub tol: Option<f64>,
    pub maxit: Option<usize>,
    pub prec: Option<Prec>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub modes: Option<usize>,
    pub method: Option<MethodChoice>,
    pub kind: Option<KindChoice>,
    pub strict: Option<bool>,
    pub warmup: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved run description.
#[derive(Debug, Clone)]
pub struct Settings {
    pub subcommand: Subcommand,
    pub problem: String,
    pub d: Option<usize>,
    pub p: Vec<usize>,
    pub nel: Vec<usize>,
    pub t_final: Option<f64>,
    pub nu: Option<f64>,
    pub tol: f64,
    pub maxit: usize,
    pub prec: Prec,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub threads: usize,
    pub modes: usize,
    pub method: MethodChoice,
    pub kind: KindChoice,
    pub strict: bool,
    pub warmup: bool,
}

fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError(format!("{name} must be positive, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<usize, ConfigError> {
    if v >= min {
        Ok(v)
    } else {
        Err(ConfigError(format!("{name} must be at least {min}, got {v}")))
    }
}

impl Settings {
    pub fn resolve(cli: Cli, env_threads: Option<String>) -> Result<Self, ConfigError> {
        let file = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let subcommand = match (cli.subcommand, file.subcommand) {
            (Some(a), Some(b)) if a != b => {
                return Err(ConfigError(format!(
                    "subcommand {} conflicts with {} in the config file",
                    a.as_str(),
                    b.as_str()
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(ConfigError("no subcommand given".into())),
        };
        let (dp, dn): (Vec<usize>, Vec<usize>) = match subcommand {
            Subcommand::Solve => (vec![3], vec![16]),
            Subcommand::Convergence => (vec![3], vec![8, 16, 32, 64]),
            Subcommand::Infsup => (vec![2], vec![8, 16, 32, 64]),
            Subcommand::Spectral => (vec![2], vec![8, 16, 32, 64, 128]),
            Subcommand::Condtable => ((2..=8).collect(), vec![32, 64, 128, 256]),
            Subcommand::Perf => (vec![2, 3, 4], vec![8, 16, 32]),
        };
        let default_problem = match subcommand {
            Subcommand::Perf => "wave2d",
            _ => "gaussian1d",
        };
        let default_tol = match subcommand {
            Subcommand::Convergence => STUDY_TOLERANCE,
            _ => PcgOptions::default().tol,
        };
        let default_format = match (&cli.out, &file.out) {
            (Some(p), _) | (None, Some(p)) if p.extension().is_some_and(|e| e == "json") => Format::Json,
            (Some(_), _) | (None, Some(_)) => Format::Csv,
            (None, None) => match subcommand {
                Subcommand::Solve | Subcommand::Perf => Format::Json,
                _ => Format::Csv,
            },
        };
        let threads = match cli.threads.or(file.threads) {
            Some(n) => n,
            None => match env_threads {
                Some(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("KRONSCHRO_THREADS must be a non-negative integer, got {s:?}")))?,
                None => 0,
            },
        };

        let s = Settings {
            subcommand,
            problem: cli.problem.or(file.problem).unwrap_or_else(|| default_problem.into()),
            d: cli.d.or(file.d),
            p: cli.p.or(file.p).unwrap_or(dp),
            nel: cli.nel.or(file.nel).unwrap_or(dn),
            t_final: cli.t_final.or(file.t_final),
            nu: cli.nu.or(file.nu),
            tol: cli.tol.or(file.tol).unwrap_or(default_tol),
            maxit: cli.maxit.or(file.maxit).unwrap_or(PcgOptions::default().maxit),
            prec: cli.prec.or(file.prec).unwrap_or(Prec::Fd),
            out: cli.out.or(file.out),
            format: cli.format.or(file.format).unwrap_or(default_format),
            seed: cli.seed.or(file.seed).unwrap_or(0),
            threads,
            modes: cli.modes.or(file.modes).unwrap_or(DEFAULT_MODES),
            method: cli.method.or(file.method).unwrap_or(MethodChoice::Both),
            kind: cli.kind.or(file.kind).unwrap_or(KindChoice::Both),
            strict: cli.strict || file.strict.unwrap_or(false),
            warmup: !cli.no_warmup && file.warmup.unwrap_or(true),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.p.is_empty() || self.nel.is_empty() {
            return Err(ConfigError("p and nel lists must not be empty".into()));
        }
        for &p in &self.p {
            at_least("p", p, if self.subcommand == Subcommand::Condtable { 1 } else { 2 })?;
        }
        for &n in &self.nel {
            at_least("nel", n, 1)?;
        }
        if let Some(t) = self.t_final {
            positive("T", t)?;
        }
        if let Some(nu) = self.nu {
            positive("nu", nu)?;
        }
        positive("tol", self.tol)?;
        if self.tol >= 1.0 {
            return Err(ConfigError(format!("tol must be below 1, got {}", self.tol)));
        }
        at_least("maxit", self.maxit, 1)?;
        at_least("modes", self.modes, 1)?;
        if let Some(d) = self.d {
            at_least("d", d, 1)?;
            if d > 3 {
                return Err(ConfigError(format!("d must be at most 3, got {d}")));
            }
        }
        match self.subcommand {
            Subcommand::Solve if self.p.len() != 1 || self.nel.len() != 1 => {
                Err(ConfigError("solve takes a single p and a single nel".into()))
            }
            Subcommand::Convergence if self.p.len() != 1 => Err(ConfigError("convergence takes a single p".into())),
            Subcommand::Convergence if self.nel.windows(2).any(|w| w[0] >= w[1]) => {
                Err(ConfigError("convergence needs an increasing nel list".into()))
            }
            Subcommand::Spectral if self.d.is_some_and(|d| d > 2) => Err(ConfigError("spectral supports d = 1 or 2".into())),
            Subcommand::Solve | Subcommand::Convergence | Subcommand::Perf => self.problem().map(|_| ()),
            _ => Ok(()),
        }
    }

    /// The manufactured problem with the requested overrides applied.
    pub fn problem(&self) -> Result<Box<dyn ManufacturedSolution>, ConfigError> {
        let wave_dim = match self.problem.as_str() {
            "wave" => Some(self.d.unwrap_or(2)),
            "wave1d" => Some(1),
            "wave2d" => Some(2),
            "wave3d" => Some(3),
            _ => None,
        };
        let fixed_dim = match self.problem.as_str() {
            "gaussian1d" | "highmode1d" => Some(1),
            _ => wave_dim,
        };
        match (fixed_dim, self.d) {
            (None, _) => return Err(ConfigError(format!("unknown problem {:?}", self.problem))),
            (Some(a), Some(b)) if a != b => {
                return Err(ConfigError(format!("problem {} is {a}-dimensional, got d = {b}", self.problem)))
            }
            _ => {}
        }
        Ok(match (self.problem.as_str(), wave_dim) {
            ("gaussian1d", _) => {
                let mut g = gaussian_1d();
                g.t_final = self.t_final.unwrap_or(g.t_final);
                g.nu = self.nu.unwrap_or(g.nu);
                Box::new(g)
            }
            ("highmode1d", _) => {
                let mut h = high_mode_1d(self.modes);
                h.t_final = self.t_final.unwrap_or(h.t_final);
                h.nu = self.nu.unwrap_or(h.nu);
                Box::new(h)
            }
            (_, Some(d)) => {
                let mut w = traveling_wave(d, 0.2);
                w.t_final = self.t_final.unwrap_or(w.t_final);
                w.nu = self.nu.unwrap_or(w.nu);
                Box::new(w)
            }
            _ => unreachable!(),
        })
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            pcg: PcgOptions {
                tol: self.tol,
                maxit: self.maxit,
                mode: if self.strict { StopMode::Strict } else { StopMode::Recurrence },
            },
            precond: self.prec.into(),
            quad_points: None,
        }
    }
}
