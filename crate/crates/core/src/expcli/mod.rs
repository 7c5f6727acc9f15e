//! Configuration-driven experiments: run, persist, emit plot data.
//!
//! Exit codes of the `levy-passage` binary:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | a check ran and failed (violations, calibration outside 3 SE) |
//! | 2 | invalid configuration or input file |
//! | 3 | simulation or output error |
//! | 4 | zero survival estimate with crude sampling |

mod cli;
mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use cli::{cli_main, run_cli};
pub use config::{ExperimentConfig, Horizons, Method, Suite, SuiteEntry};

use crate::boundary::Boundary;
use crate::error::{Error, Result};
use crate::passage_mc::{fit_exponent, fit_exponent_window, survival_tally, ExponentFit, SurvivalCurve};
use crate::simulate::PathModel;
use crate::stats::Estimate;
use crate::tilt_is::{is_estimate_batch, make_tilt, Side};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_ZERO_SURVIVAL: i32 = 4;

/// Exit code for an error raised while running a validated experiment.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ZeroSurvival { .. } => EXIT_ZERO_SURVIVAL,
        Error::InvalidTriplet(_)
        | Error::InvalidBoundary(_)
        | Error::InvalidArgument(_)
        | Error::FirstMomentAbsent
        | Error::NoJumpsOfRequiredSign { .. }
        | Error::Json(_) => EXIT_INVALID_CONFIG,
        _ => EXIT_SIMULATION,
    }
}

/// Importance-sampling diagnostics of one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonDiagnostics {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub ess: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOutput {
    pub config_hash: String,
    pub method: Method,
    pub fit: ExponentFit,
    /// Horizons left out of the fit because their estimate is zero.
    pub censored: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub diagnostics: Vec<HorizonDiagnostics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub wall_time_s: f64,
    pub threads: usize,
    pub files: Vec<PathBuf>,
    pub config: ExperimentConfig,
}

/// A finished experiment and where its files live.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config_hash: String,
    pub output_dir: PathBuf,
    pub curve: SurvivalCurve,
    pub fit: FitOutput,
}

fn stem(hash: &str) -> &str {
    &hash[..16.min(hash.len())]
}

impl RunResult {
    pub fn curve_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}_curve.csv", stem(&self.config_hash)))
    }

    pub fn fit_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}_fit.json", stem(&self.config_hash)))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}_manifest.json", stem(&self.config_hash)))
    }

    /// Reloads a run written by [`run_experiment`].
    pub fn load(output_dir: &Path, config_hash: &str) -> Result<Self> {
        let mut r = RunResult {
            config_hash: config_hash.to_string(),
            output_dir: output_dir.to_path_buf(),
            curve: SurvivalCurve::default(),
            fit: FitOutput {
                config_hash: String::new(),
                method: Method::Crude,
                fit: ExponentFit {
                    delta_hat: 0.0,
                    stderr: 0.0,
                    window: (0.0, 0.0),
                    intercept: 0.0,
                    points: 0,
                },
                censored: 0,
                diagnostics: Vec::new(),
            },
        };
        for p in [r.curve_path(), r.fit_path()] {
            if !p.exists() {
                return Err(Error::arg(format!("no run output at {}", p.display())));
            }
        }
        r.curve = SurvivalCurve::read_csv(&r.curve_path())?;
        r.fit = serde_json::from_str(&std::fs::read_to_string(r.fit_path())?)?;
        Ok(r)
    }
}

fn tilt_side(b: &Boundary, cfg: &ExperimentConfig) -> Side {
    let slope = b.deriv(cfg.horizons.t_max);
    if slope > 0.0 {
        Side::Positive
    } else if slope < 0.0 {
        Side::Negative
    } else if cfg.process.jumps.mass_negative() > 0.0 {
        Side::Negative
    } else {
        Side::Positive
    }
}

/// Estimates the survival curve, fits the exponent and writes
/// `<hash>_curve.csv`, `<hash>_fit.json` and `<hash>_manifest.json`, where
/// `<hash>` is the first 16 hex digits of [`ExperimentConfig::hash`].
///
/// Identical configs give identical file names and byte-identical curve and
/// fit files, whatever the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let hash = cfg.hash()?;
    let sim = cfg.sim_config();
    let horizons = cfg.horizon_grid()?;
    let model = PathModel::new(&cfg.process, &sim)?;
    let tilt = match cfg.method {
        Method::Crude => None,
        Method::Importance => {
            Some(make_tilt(&cfg.process, &cfg.boundary, tilt_side(&cfg.boundary, cfg), cfg.tilt_active_from)?)
        }
    };

    let mut curve = SurvivalCurve::default();
    let mut diagnostics = Vec::new();
    for (j, &h) in horizons.iter().enumerate() {
        let e = match &tilt {
            None => {
                let tally = survival_tally(&model, &cfg.boundary, h, 0..cfg.n_paths, &sim, cfg.seed, j as u64)?;
                let e = Estimate::from_tally(&tally);
                if e.p_hat == 0.0 {
                    return Err(Error::ZeroSurvival { horizon: h });
                }
                e
            }
            Some(spec) => {
                let r = is_estimate_batch(&cfg.process, &cfg.boundary, spec, h, cfg.n_paths, &sim, cfg.seed, j as u64)?;
                diagnostics.push(HorizonDiagnostics { horizon: h, ess: r.ess, warning: r.warning });
                r.estimate
            }
        };
        curve.push(h, &e);
    }

    let mut positive = SurvivalCurve::default();
    for i in (0..curve.len()).filter(|&i| curve.estimates[i] > 0.0) {
        positive.horizons.push(curve.horizons[i]);
        positive.estimates.push(curve.estimates[i]);
        positive.ci_low.push(curve.ci_low[i]);
        positive.ci_high.push(curve.ci_high[i]);
        positive.n_paths.push(curve.n_paths[i]);
    }
    let censored = curve.len() - positive.len();
    if positive.is_empty() {
        return Err(Error::ZeroSurvival { horizon: horizons[0] });
    }
    let fit = match cfg.fit_window {
        Some((lo, hi)) => fit_exponent_window(&positive, lo, hi),
        None => fit_exponent(&positive),
    }
    .map_err(|e| match e {
        Error::InvalidArgument(m) => Error::Domain(m),
        e => e,
    })?;

    std::fs::create_dir_all(&cfg.output_dir)?;
    let result = RunResult {
        config_hash: hash.clone(),
        output_dir: cfg.output_dir.clone(),
        curve,
        fit: FitOutput {
            config_hash: hash.clone(),
            method: cfg.method,
            fit,
            censored,
            diagnostics,
        },
    };
    result.curve.write_csv(&result.curve_path())?;
    std::fs::write(result.fit_path(), serde_json::to_string_pretty(&result.fit)? + "\n")?;
    let manifest = Manifest {
        config_hash: hash,
        seed: cfg.seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        files: vec![result.curve_path(), result.fit_path()],
        config: cfg.clone(),
    };
    std::fs::write(result.manifest_path(), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(result)
}

/// The plot files of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub csv: PathBuf,
    pub script: PathBuf,
    /// Rows dropped because `p̂ = 0`.
    pub censored: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PlotRow {
    pub lnT: f64,
    pub lnp: f64,
    pub lncilow: f64,
    pub lncihigh: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
}

/// Writes `<hash>_plot.csv` (`ln T` against `ln p̂` with its interval, plus
/// the raw values) and a gnuplot script `<hash>_plot.gp` that draws it.
pub fn emit_plot_data(run: &RunResult) -> Result<PlotData> {
    if !run.curve_path().exists() {
        return Err(Error::arg(format!("missing run output {}", run.curve_path().display())));
    }
    let s = stem(&run.config_hash);
    let csv_path = run.output_dir.join(format!("{s}_plot.csv"));
    let gp_path = run.output_dir.join(format!("{s}_plot.gp"));
    let c = &run.curve;
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut censored = 0;
    for i in 0..c.len() {
        if !(c.estimates[i] > 0.0) {
            censored += 1;
            continue;
        }
        w.serialize(PlotRow {
            lnT: c.horizons[i].ln(),
            lnp: c.estimates[i].ln(),
            lncilow: c.ci_low[i].ln(),
            lncihigh: c.ci_high[i].ln(),
            horizon: c.horizons[i],
            p: c.estimates[i],
            ci_low: c.ci_low[i],
            ci_high: c.ci_high[i],
            n: c.n_paths[i],
        })?;
    }
    w.flush()?;

    let f = &run.fit.fit;
    let data = csv_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let script = format!(
        "# survival curve of run {hash}\n\
         # censored rows (p = 0): {censored}\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'ln T'\n\
         set ylabel 'ln p'\n\
         fit_line(x) = {b} - {d} * x\n\
         plot '{data}' using 1:3:4 with filledcurves title '95% CI', \\\n\
         \x20    '' using 1:2 with points pt 7 title 'estimate', \\\n\
         \x20    fit_line(x) with lines title 'slope -{d:.4}'\n",
        hash = run.config_hash,
        b = f.intercept,
        d = f.delta_hat,
    );
    std::fs::write(&gp_path, script)?;
    Ok(PlotData { csv: csv_path, script: gp_path, censored })
}

/// Reads the rows of a plot CSV back into a curve.
pub fn read_plot_csv(path: &Path) -> Result<SurvivalCurve> {
    let mut c = SurvivalCurve::default();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let r: PlotRow = row?;
        c.horizons.push(r.horizon);
        c.estimates.push(r.p);
        c.ci_low.push(r.ci_low);
        c.ci_high.push(r.ci_high);
        c.n_paths.push(r.n);
    }
    Ok(c)
}
