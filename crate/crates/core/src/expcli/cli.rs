use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use super::{
    emit_plot_data, exit_code, run_experiment, ExperimentConfig, Suite, EXIT_CHECK_FAILED,
    EXIT_INVALID_CONFIG, EXIT_OK, EXIT_SIMULATION,
};
use crate::bound_machinery::{verify_inequalities, ProofConstants};
use crate::boundary::{growth_props, l2_derivative_test, uchiyama_test, Boundary, GrowthReport};
use crate::error::{Error, Result};
use crate::oracles::{calibration_grid, write_calibration_csv};
use crate::quadrature::IntegralClass;

#[derive(Parser, Debug)]
#[command(name = "levy-passage", version, about = "Survival probabilities of Lévy processes below moving boundaries")]
struct Cli {
    /// Worker threads for path simulation (results do not depend on it).
    #[arg(long, global = true, env = "LEVY_PASSAGE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment config and write its curve, fit, manifest and plot data.
    Run {
        config: PathBuf,
        /// Skip the plot CSV and gnuplot script.
        #[arg(long)]
        no_plot: bool,
    },
    /// Run every experiment listed in a suite file.
    Suite { suite: PathBuf },
    /// Classify a boundary: Uchiyama integral, L2 norm of f′, growth bounds.
    CheckBoundary {
        boundary: PathBuf,
        /// Horizon for the growth checks.
        #[arg(long, default_value_t = 1e6)]
        horizon: f64,
        /// Upper limit for numerical tail integrals of custom boundaries.
        #[arg(long, default_value_t = 1e8)]
        quad_upper: f64,
    },
    /// Check the induction inequalities of the bound functions.
    VerifyBounds { constants: PathBuf },
    /// Compare crude Brownian estimates with the closed form on a grid.
    Calibrate {
        #[arg(long, default_value_t = 20_000)]
        paths: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Step as a multiple of √T.
        #[arg(long, default_value_t = 0.01)]
        dt_factor: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0])]
        levels: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 4.0, 16.0])]
        horizons: Vec<f64>,
        /// CSV output; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Input of `verify-bounds`. `l2_norm_sq` may be given directly or derived
/// from a boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsInput {
    #[serde(default)]
    c1: Option<f64>,
    #[serde(default)]
    c2: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    l2_norm_sq: Option<f64>,
    #[serde(default)]
    boundary: Option<Boundary>,
    #[serde(default = "default_bounds_horizon")]
    horizon: f64,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    seed: u64,
}

fn default_bounds_horizon() -> f64 {
    65536.0
}

fn default_samples() -> usize {
    1000
}

#[derive(Debug, Serialize)]
struct BoundaryReport {
    boundary: Boundary,
    uchiyama: IntegralClass,
    l2_derivative: IntegralClass,
    growth: Option<GrowthReport>,
}

/// Prints a line, ignoring a closed stdout.
fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_INVALID_CONFIG
    })?;
    serde_json::from_str(&text).map_err(|e| {
        eprintln!("error: invalid JSON in {}: {e}", path.display());
        EXIT_INVALID_CONFIG
    })
}

fn report(e: &Error, code: i32) -> i32 {
    eprintln!("error: {e}");
    if let Error::ZeroSurvival { .. } = e {
        eprintln!("hint: set \"method\": \"importance\", raise n_paths, or lower T_max");
    }
    code
}

fn run_one(cfg: &ExperimentConfig, plot: bool) -> i32 {
    if let Err(e) = cfg.validate() {
        return report(&e, EXIT_INVALID_CONFIG);
    }
    let run = match run_experiment(cfg) {
        Ok(r) => r,
        Err(e) => return report(&e, exit_code(&e)),
    };
    let f = &run.fit.fit;
    emit(&format!(
        "{}  delta_hat = {:.4} ± {:.4}  ({} horizons, window [{}, {}])",
        &run.config_hash[..16],
        f.delta_hat,
        f.stderr,
        f.points,
        f.window.0,
        f.window.1
    ));
    for d in &run.fit.diagnostics {
        if let Some(w) = &d.warning {
            eprintln!("warning: T = {}: {w}", d.horizon);
        }
    }
    if plot {
        if let Err(e) = emit_plot_data(&run) {
            return report(&e, EXIT_SIMULATION);
        }
    }
    EXIT_OK
}

fn check_boundary(path: &Path, horizon: f64, quad_upper: f64) -> i32 {
    let b: Boundary = match read_json(path) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let out = (|| -> Result<BoundaryReport> {
        Ok(BoundaryReport {
            uchiyama: uchiyama_test(&b, quad_upper)?,
            l2_derivative: l2_derivative_test(&b, quad_upper)?,
            growth: growth_props(&b, horizon).ok(),
            boundary: b.clone(),
        })
    })();
    match out.and_then(|r| Ok(serde_json::to_string_pretty(&r)?)) {
        Ok(s) => {
            emit(&s);
            EXIT_OK
        }
        Err(e) => report(&e, EXIT_INVALID_CONFIG),
    }
}

fn verify_bounds(path: &Path) -> i32 {
    let input: BoundsInput = match read_json(path) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let d = ProofConstants::default();
    let l2 = match (input.l2_norm_sq, &input.boundary) {
        (Some(v), _) => Ok(v),
        (None, Some(b)) => match l2_derivative_test(b, 0.0) {
            Ok(IntegralClass::Finite(v)) => Ok(v),
            Ok(c) => Err(Error::arg(format!("‖f′‖² is not finite for this boundary ({c:?})"))),
            Err(e) => Err(e),
        },
        (None, None) => Ok(d.l2_norm_sq),
    };
    let pc = l2.and_then(|l2| {
        ProofConstants::new(
            input.c1.unwrap_or(d.c1),
            input.c2.unwrap_or(d.c2),
            input.beta.unwrap_or(d.beta),
            l2,
        )
    });
    let pc = match pc {
        Ok(pc) => pc,
        Err(e) => return report(&e, EXIT_INVALID_CONFIG),
    };
    match verify_inequalities(&pc, input.horizon, input.samples, input.seed)
        .and_then(|r| Ok((r.passed(), serde_json::to_string_pretty(&r)?)))
    {
        Ok((passed, s)) => {
            emit(&s);
            if passed {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => report(&e, EXIT_INVALID_CONFIG),
    }
}

#[allow(clippy::too_many_arguments)]
fn calibrate(paths: u64, seed: u64, dt_factor: f64, levels: &[f64], horizons: &[f64], out: Option<&Path>) -> i32 {
    let rows = match calibration_grid(levels, horizons, paths, dt_factor, seed) {
        Ok(r) => r,
        Err(e) => return report(&e, EXIT_INVALID_CONFIG),
    };
    let written = match out {
        Some(p) => write_calibration_csv(&rows, p),
        None => {
            emit("a,T,exact,p_hat,std_error,z");
            for r in &rows {
                emit(&format!("{},{},{},{},{},{}", r.a, r.horizon, r.exact, r.p_hat, r.std_error, r.z));
            }
            Ok(())
        }
    };
    if let Err(e) = written {
        return report(&e, EXIT_SIMULATION);
    }
    let bad = rows.iter().filter(|r| !r.within(3.0)).count();
    eprintln!("{} of {} grid points within 3 SE of the closed form", rows.len() - bad, rows.len());
    if bad == 0 {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn dispatch(command: Command) -> i32 {
    match command {
        Command::Run { config, no_plot } => match ExperimentConfig::load(&config) {
            Ok(cfg) => run_one(&cfg, !no_plot),
            Err(e) => report(&e, EXIT_INVALID_CONFIG),
        },
        Command::Suite { suite } => {
            let entries = match Suite::load(&suite) {
                Ok(e) => e,
                Err(e) => return report(&e, EXIT_INVALID_CONFIG),
            };
            let mut worst = EXIT_OK;
            for (name, cfg) in entries {
                eprintln!("== {name}");
                let code = match cfg {
                    Ok(cfg) => run_one(&cfg, true),
                    Err(e) => report(&e, EXIT_INVALID_CONFIG),
                };
                worst = worst.max(code);
            }
            worst
        }
        Command::CheckBoundary { boundary, horizon, quad_upper } => check_boundary(&boundary, horizon, quad_upper),
        Command::VerifyBounds { constants } => verify_bounds(&constants),
        Command::Calibrate { paths, seed, dt_factor, levels, horizons, out } => {
            calibrate(paths, seed, dt_factor, &levels, &horizons, out.as_deref())
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
        }
    };
    match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => {
                eprintln!("error: cannot start {n} threads: {e}");
                EXIT_INVALID_CONFIG
            }
        },
        None => dispatch(cli.command),
    }
}

pub fn cli_main() -> ExitCode {
    ExitCode::from(run_cli(std::env::args_os()) as u8)
}
