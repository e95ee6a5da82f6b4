//! Command-line front end. Every command writes its artifacts and a
//! `summary.json` into `--out`, prints one line per check and maps the outcome
//! to an exit code.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::diagonal::{refinement_sweep, Partition};
use crate::dsbc::{run_forward, run_inversion, Scenario};
use crate::error::{Error, Result};
use crate::factor::{factor_finite, volterra_demo};
use crate::linops::{cholesky_upper, read_matrix, write_matrix, Mat};
use crate::nest::{Nest, Orientation};
use crate::report::{all_passed, Check};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "NESTFACT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "nestfact", version, about = "Triangular factorization along nests and boundary-control inversion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the command's main tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for generated inputs.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Canonical factor of a positive-definite matrix.
    Factorize {
        /// Matrix text file. Without it a random SPD matrix of size `--n` is used.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// `coordinate`, `delayed`, or a nest JSON file.
        #[arg(long, default_value = "coordinate")]
        nest: String,
        #[arg(long, default_value_t = 50)]
        n: usize,
    },
    /// Partition diagonals of an operator under mesh halving.
    DiagonalSweep {
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, default_value = "coordinate")]
        nest: String,
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Corrected factorization of the min-kernel against the Volterra factor.
    Volterra {
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
    /// Forward operators of a boundary-control scenario.
    DsbcForward {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Potential recovery from a boundary-control scenario.
    DsbcInvert {
        #[arg(long)]
        scenario: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Factorize { .. } => "factorize",
            Command::DiagonalSweep { .. } => "diagonal-sweep",
            Command::Volterra { .. } => "volterra",
            Command::DsbcForward { .. } => "dsbc-forward",
            Command::DsbcInvert { .. } => "dsbc-invert",
        }
    }
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    passed: bool,
    checks: &'a [Check],
    details: T,
}

/// Runs a parsed command, returns the checks it evaluated.
pub fn run(cli: &Cli) -> Result<Vec<Check>> {
    let c = &cli.common;
    if let Some(tol) = c.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Config(format!("--tol must be positive, got {tol}")));
        }
    }
    std::fs::create_dir_all(&c.out)?;
    let name = cli.command.name();
    match &cli.command {
        Command::Factorize { matrix, nest, n } => factorize(c, name, matrix.as_deref(), nest, *n),
        Command::DiagonalSweep { matrix, nest, n } => diagonal_sweep(c, name, matrix.as_deref(), nest, *n),
        Command::Volterra { n } => volterra(c, name, *n),
        Command::DsbcForward { scenario } => {
            let sc = Scenario::read_json(scenario).map_err(as_config)?;
            let rep = run_forward(&sc)?;
            rep.write_response_csv(c.out.join("response.csv"))?;
            write_matrix(c.out.join("connecting.txt"), &rep.c)?;
            let checks = rep.checks();
            summarize(c, name, &checks, &rep)?;
            Ok(checks)
        }
        Command::DsbcInvert { scenario } => {
            let mut sc = Scenario::read_json(scenario).map_err(as_config)?;
            if let Some(tol) = c.tol {
                sc.recovery_tol = tol;
            }
            let rep = run_inversion(&sc)?;
            rep.write_csv(c.out.join("potential.csv"))?;
            let checks = rep.checks();
            summarize(c, name, &checks, &rep)?;
            Ok(checks)
        }
    }
}

/// Unreadable or malformed input files are configuration errors.
fn as_config(e: Error) -> Error {
    match e {
        Error::Io(_) | Error::Json(_) => Error::Config(e.to_string()),
        other => other,
    }
}

fn summarize<T: Serialize>(c: &Common, name: &str, checks: &[Check], details: T) -> Result<()> {
    let s = Summary {
        command: name,
        seed: c.seed,
        passed: all_passed(checks),
        checks,
        details,
    };
    std::fs::write(c.out.join("summary.json"), serde_json::to_string_pretty(&s)? + "\n")?;
    Ok(())
}

fn load_nest(spec: &str, n: usize) -> Result<Nest> {
    match spec {
        "coordinate" => Nest::coordinate(n, Orientation::Forward),
        "delayed" => Nest::coordinate(n, Orientation::Delayed),
        path => Nest::read_json(path).map_err(as_config),
    }
}

fn input_matrix(path: Option<&Path>, n: usize, seed: u64, spd: bool) -> Result<Mat> {
    if let Some(p) = path {
        return read_matrix(p).map_err(as_config);
    }
    if n == 0 {
        return Err(Error::Config("--n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    Ok(if spd {
        &a.matmul(&a.transpose()) + &Mat::identity(n).scale(0.1 * n as f64)
    } else {
        a
    })
}

fn factorize(c: &Common, name: &str, matrix: Option<&Path>, nest: &str, n: usize) -> Result<Vec<Check>> {
    let m = input_matrix(matrix, n, c.seed, true)?;
    let f = load_nest(nest, m.rows())?;
    let res = factor_finite(&m, &f)?;
    let tol = c.tol.unwrap_or(1e-8);
    let mut checks = vec![
        Check::at_most("residual", res.residual, tol),
        Check::at_most("tri_defect", res.tri_defect, tol),
    ];
    if nest == "coordinate" {
        let chol = cholesky_upper(&m)?;
        checks.push(Check::at_most("cholesky_difference", (&res.v - &chol).norm_max(), tol));
    }
    write_matrix(c.out.join("v.txt"), &res.v)?;
    let details = json!({
        "dim": m.rows(),
        "nest": nest,
        "rank": res.rank,
        "diagonal_ratio": res.diagonal_ratio,
    });
    summarize(c, name, &checks, details)?;
    Ok(checks)
}

fn diagonal_sweep(c: &Common, name: &str, matrix: Option<&Path>, nest: &str, n: usize) -> Result<Vec<Check>> {
    let w = input_matrix(matrix, n, c.seed, false)?;
    let f = load_nest(nest, w.cols())?;
    let steps = f.len() - 1;
    let mut schedule = Vec::new();
    let mut m = 1;
    while m < steps {
        schedule.push(Partition::uniform(&f, m)?);
        m *= 2;
    }
    schedule.push(Partition::full(&f));
    let sweep = refinement_sweep(&w, &f, &schedule)?;
    sweep.write_csv(c.out.join("sweep.csv"))?;
    let slack = c.tol.unwrap_or(1e-9);
    let worst = sweep.results.iter().map(|r| r.norm - r.norm_w).fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![Check::at_most("norm_excess", worst, slack)];
    let details = json!({
        "rows": w.rows(),
        "cols": w.cols(),
        "partitions": schedule.len(),
        "norm_w": sweep.results.first().map(|r| r.norm_w),
    });
    summarize(c, name, &checks, details)?;
    Ok(checks)
}

fn volterra(c: &Common, name: &str, n: usize) -> Result<Vec<Check>> {
    let rep = volterra_demo(n)?;
    rep.write_csv(c.out.join("volterra.csv"))?;
    let last = rep.rows.last().expect("three rows");
    let checks = vec![
        Check::at_most("kernel_error", last.kernel_error, c.tol.unwrap_or(0.1)),
        Check::at_most("residual", last.residual, 0.05),
        Check::at_least("monotone", f64::from(u8::from(rep.is_monotone())), 1.0),
    ];
    let rows: Vec<_> = rep
        .rows
        .iter()
        .map(|r| json!({"n": r.n, "kernel_error": r.kernel_error, "residual": r.residual, "tri_defect": r.tri_defect}))
        .collect();
    summarize(c, name, &checks, rows)?;
    Ok(checks)
}

/// Reads [`THREADS_ENV`] and sizes the global pool.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Parses `args`, runs, prints check lines and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("nestfact: setup: {e}");
        return EXIT_CONFIG;
    }
    let stage = cli.command.name();
    match run(&cli) {
        Ok(checks) => {
            for ch in &checks {
                println!("{}", ch.line());
            }
            if all_passed(&checks) {
                EXIT_OK
            } else {
                EXIT_FAIL
            }
        }
        Err(e) if e.is_config() => {
            eprintln!("nestfact: {stage}: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("nestfact: {stage}: numerical failure: {e}");
            EXIT_NUMERICAL
        }
    }
}
