//! `dtproj`: runs trajectories, order studies, the scheme A versus
//! standard projection comparison, and the property suite.
//!
//! # Configuration files
//!
//! Flat `key=value` text, one key per line; `#` starts a comment and later
//! lines override earlier ones. Command-line flags override file values.
//!
//! | key          | meaning                                                   |
//! |--------------|-----------------------------------------------------------|
//! | `problem`    | `kepler` or `harmonic`                                    |
//! | `e`          | Kepler eccentricity, `0 <= e < 1`                         |
//! | `method`     | `plain`, `scheme_a`, `scheme_b`, `standard`, `local`, or a scheme name such as `RK4Proj13` (sets tableau and invariants too) |
//! | `tableau`    | `euler`, `rk2`, `heun`, `rk4`, `rk5`, `rk7`, `midpoint`, or a tableau file |
//! | `dgrad`      | `avf`, `ci` or `sci`                                      |
//! | `quad_nodes` | Gauss–Legendre nodes for AVF                              |
//! | `invariants` | comma list of 1-based invariant indices                   |
//! | `h`, `steps` | step size and step count                                  |
//! | `out`        | output path                                               |
//! | `tol_solver` | nonlinear solver tolerance                                |
//! | `check`      | after `integrate`, assert conservation of the selection   |
//! | `seed`       | seed of the randomized property checks                    |
//! | `t_final`, `h_list` | order-study final time and step sizes              |
//!
//! # Tableau files
//!
//! Whitespace-separated numbers, decimal or `p/q`, `#` comments. The rows
//! of `a` come first (the entry count of the first row gives the stage
//! count), then one line each for `b`, `c` and the declared order:
//!
//! ```text
//! # explicit midpoint
//! 0   0
//! 1/2 0
//! 0   1
//! 0   1/2
//! 2
//! ```
//!
//! # Exit codes
//!
//! 0 success, 1 solver failure, 2 configuration error, 3 failed check.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dtproj::experiments::{
    check_run, compare_standard, order_study, property_suite, run, CheckResult, RunConfig, DEFAULT_COMPARE_TABLEAU,
};
use dtproj::integrator::MethodVariant;
use dtproj::Error;

#[derive(Parser)]
#[command(name = "dtproj", version, about = "Integrators that conserve chosen first integrals exactly")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write the trajectory CSV.
    Integrate(ConfigArgs),
    /// Global error at a fixed final time over a sweep of step sizes.
    OrderStudy(ConfigArgs),
    /// Run the configured method against the standard orthogonal projection.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        /// Configuration of the second slot (default: the same
        /// configuration with `method=standard`).
        #[arg(long, value_name = "FILE")]
        against: Option<PathBuf>,
    },
    /// Run the property suite.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Shorter runs for the long-horizon checks.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// Configuration file.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    e: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tableau: Option<String>,
    #[arg(long)]
    dgrad: Option<String>,
    #[arg(long)]
    quad_nodes: Option<String>,
    /// Comma list of 1-based invariant indices.
    #[arg(long)]
    invariants: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(short, long)]
    out: Option<String>,
    #[arg(long)]
    tol_solver: Option<String>,
    /// Assert conservation of the selected invariants after the run.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    t_final: Option<String>,
    /// Comma list of step sizes.
    #[arg(long)]
    h_list: Option<String>,
    /// Any configuration key as `key=value`; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("problem", &self.problem),
            ("e", &self.e),
            ("method", &self.method),
            ("tableau", &self.tableau),
            ("dgrad", &self.dgrad),
            ("quad_nodes", &self.quad_nodes),
            ("invariants", &self.invariants),
            ("h", &self.h),
            ("steps", &self.steps),
            ("out", &self.out),
            ("tol_solver", &self.tol_solver),
            ("seed", &self.seed),
            ("t_final", &self.t_final),
            ("h_list", &self.h_list),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.check {
            cfg.check = true;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{kv}`")))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

/// Process exit status.
enum Status {
    Ok,
    SolverFailure,
    ConfigError,
    CheckFailed,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(match s {
            Status::Ok => 0,
            Status::SolverFailure => 1,
            Status::ConfigError => 2,
            Status::CheckFailed => 3,
        })
    }
}

fn status_of(e: &Error) -> Status {
    match e {
        Error::Linalg(_) | Error::Singularity(_) | Error::SolverFailure { .. } => Status::SolverFailure,
        _ => Status::ConfigError,
    }
}

fn fail(e: Error) -> Status {
    eprintln!("error: {e}");
    status_of(&e)
}

fn print_checks(mut w: impl Write, results: &[CheckResult]) -> io::Result<bool> {
    for r in results {
        writeln!(w, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail)?;
    }
    Ok(results.iter().all(|r| r.passed))
}

fn integrate(args: &ConfigArgs) -> Result<Status, Error> {
    let cfg = args.load()?;
    let traj = run(&cfg)?;
    if cfg.out.is_none() {
        traj.write_csv(io::stdout().lock())?;
    }
    let completed = traj.records.len() - 1;
    eprintln!(
        "{completed}/{} steps in {:.3}s, max drift {:?}",
        cfg.steps,
        traj.wall_time.as_secs_f64(),
        traj.max_drift()
    );
    if let Some(e) = &traj.failure {
        eprintln!("error: step {} failed: {e}", completed + 1);
        return Ok(status_of(e));
    }
    // the CSV may be on stdout, so check results go to stderr
    if cfg.check && !print_checks(io::stderr().lock(), &check_run(&cfg, &traj))? {
        return Ok(Status::CheckFailed);
    }
    Ok(Status::Ok)
}

fn order(args: &ConfigArgs) -> Result<Status, Error> {
    let cfg = args.load()?;
    let study = order_study(&cfg, &cfg.h_list, cfg.t_final)?;
    match &cfg.out {
        Some(path) => study.write_csv(BufWriter::new(File::create(path)?))?,
        None => study.write_csv(io::stdout().lock())?,
    }
    Ok(Status::Ok)
}

fn compare(args: &ConfigArgs, against: Option<&PathBuf>) -> Result<Status, Error> {
    let mut first = args.load()?;
    if first.tableau.is_none() {
        first.tableau = Some(DEFAULT_COMPARE_TABLEAU.to_string());
    }
    let second = match against {
        Some(path) => {
            let mut c = RunConfig::load(path)?;
            if c.tableau.is_none() {
                c.tableau = first.tableau.clone();
            }
            c
        }
        None => RunConfig {
            method: MethodVariant::StandardOrthogonal,
            ..first.clone()
        },
    };
    let report = compare_standard(&first, &second)?;
    let text = report.render();
    match &first.out {
        Some(path) => std::fs::write(path, &text)?,
        None => print!("{text}"),
    }
    if report.methods.iter().any(|m| !m.completed) {
        return Ok(Status::SolverFailure);
    }
    Ok(Status::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Integrate(args) => integrate(args),
        Command::OrderStudy(args) => order(args),
        Command::Compare { config, against } => compare(config, against.as_ref()),
        Command::Check { seed, quick } => print_checks(io::stdout().lock(), &property_suite(*seed, *quick))
            .map(|ok| if ok { Status::Ok } else { Status::CheckFailed })
            .map_err(Error::from),
    };
    result.unwrap_or_else(fail).into()
}
