//! The `llb` command-line driver.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use llb_core::diagnostics::{self, CheckReport};
use llb_core::io::{self, Check, RunConfig};
use llb_core::norms::{ensemble_max, gn_ensemble, GnParams};
use llb_core::verify::{self, ConvergenceOp, Suite};
use llb_core::{par, Error, InitialData};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "llb",
    version,
    about = "Landau-Lifshitz-Bloch flow on periodic Riemannian tori"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation and write diagnostics, snapshots and a report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output.dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite against the configured setup.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
    /// Gagliardo-Nirenberg ratios over an ensemble of random band-limited sections.
    Gn(GnArgs),
    /// Grid-refinement study of an operator or of the energy identity.
    Convergence {
        #[arg(long)]
        op: ConvergenceOp,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct GnArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long)]
    j: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, value_parser = parse_exponent)]
    p: f64,
    #[arg(long, value_parser = parse_exponent)]
    r: f64,
    #[arg(long, value_parser = parse_exponent)]
    q: f64,
    /// Seed of sample 0; defaults to `init.seed` of the config or 0.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; defaults to `gn.csv` in `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_exponent(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")),
    }
}

/// Failure of a subcommand before any check could be evaluated.
struct UsageError(String);

impl From<Error> for UsageError {
    fn from(e: Error) -> Self {
        UsageError(e.to_string())
    }
}

type CmdResult = Result<i32, UsageError>;

fn load_config(path: &Path) -> Result<RunConfig, UsageError> {
    let text = fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    io::parse_config(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), UsageError> {
    fs::write(path, contents).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), UsageError> {
    fs::create_dir_all(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn selected_checks(cfg: &RunConfig, traj: &llb_core::Trajectory) -> Vec<CheckReport> {
    let curved = cfg.curved_metric();
    let mut reports = Vec::new();
    for check in &cfg.output.checks {
        match check {
            Check::MaxPrinciple => {
                reports.push(diagnostics::check_max_principle(traj, diagnostics::MAX_PRINCIPLE_TOL));
            }
            Check::LpMonotone => {
                for p in [2, 4, 8] {
                    reports.push(diagnostics::check_lp_monotone(traj, p, diagnostics::LP_MONOTONE_TOL));
                }
            }
            Check::Energy => reports.push(diagnostics::check_energy_identity(traj, diagnostics::ENERGY_TOL)),
            Check::DvBound => {
                reports.push(diagnostics::check_dv_bound(traj, diagnostics::DV_BOUND_TOL, curved));
            }
            Check::L2Decrement => {
                reports.push(diagnostics::check_l2_decrement(traj, diagnostics::DECREMENT_TOL));
            }
        }
    }
    reports
}

fn simulate(config: &Path, out: Option<PathBuf>) -> CmdResult {
    let mut cfg = load_config(config)?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    write_file(&dir.join("config.resolved"), cfg.to_text())?;

    let traj = verify::simulate(&cfg)?;
    write_file(&dir.join("diagnostics.csv"), io::diagnostics_csv(&traj.records))?;
    write_file(&dir.join("slack.csv"), io::slack_csv(&traj))?;
    let snaps = dir.join("snapshots");
    create_dir(&snaps)?;
    for (i, (state, t)) in traj.states.iter().zip(&traj.times).enumerate() {
        io::write_snapshot(state, *t, snaps.join(format!("snap_{i:06}.bin")))?;
    }

    let reports = selected_checks(&cfg, &traj);
    let mut text = format!(
        "termination: {}\nsteps: {}\n",
        traj.termination,
        traj.records.len().saturating_sub(1)
    );
    for r in &reports {
        text.push_str(&format!("{r}\n"));
    }
    write_file(&dir.join("report.txt"), &text)?;
    eprint!("{text}");
    let ok = traj.completed() && reports.iter().all(CheckReport::passed);
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn verify_cmd(config: &Path, suite: Suite) -> CmdResult {
    let cfg = load_config(config)?;
    let report = verify::run_suite(&cfg, suite)?;
    eprint!("{report}");
    Ok(if report.passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn gn(args: GnArgs) -> CmdResult {
    let cfg = load_config(&args.config)?;
    let params = GnParams {
        j: args.j,
        k: args.k,
        p: args.p,
        r: args.r,
        q: args.q,
    };
    match params.validate() {
        Ok(()) => {}
        Err(Error::ExponentBalance { .. }) => {
            return Err(UsageError(format!(
                "exponent balance violated: {}",
                params.balance_equation()
            )))
        }
        Err(e) => return Err(e.into()),
    }
    let grid = cfg.build_grid()?;
    let conn = cfg.build_connection(&grid)?;
    let seed = args.seed.unwrap_or(match cfg.init {
        InitialData::RandomBandlimited { seed, .. } => seed,
        _ => 0,
    });
    let kmax = (grid.shape().min_size() / 8).max(1);
    let samples = gn_ensemble(&params, args.samples, seed, kmax, &grid, &conn)?;
    let path = match args.out {
        Some(p) => p,
        None => {
            create_dir(&cfg.output.dir)?;
            cfg.output.dir.join("gn.csv")
        }
    };
    write_file(&path, io::gn_csv(&params, &samples))?;
    eprintln!(
        "{} samples, |kappa| <= {kmax}, seeds {seed}..: max ratio {:.6}",
        samples.len(),
        ensemble_max(&samples)
    );
    Ok(EXIT_OK)
}

fn convergence(op: ConvergenceOp, out: Option<PathBuf>) -> CmdResult {
    let study = verify::convergence_study(op)?;
    eprintln!("{study}");
    if let Some(path) = out {
        write_file(&path, study.csv())?;
    }
    Ok(if study.passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = par::install(par::threads_from_env(), move || match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Verify { config, suite } => verify_cmd(&config, suite),
        Command::Gn(args) => gn(args),
        Command::Convergence { op, out } => convergence(op, out),
    });
    match result {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}
