//! Runs a config-driven experiment and emits its plot data.
//!
//! cargo run --release --example run_experiment -- [out_dir]

use levy_passage::expcli::{emit_plot_data, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"{
  "process": {"sigma2": 1.0, "drift": 0.0, "atoms": [[-0.5, 1.0]]},
  "boundary": {"kind": "power", "gamma": 0.25, "sign": "plus", "offset": 1.0},
  "horizons": {"T_min": 1, "T_max": 1000, "points_per_decade": 4},
  "n_paths": 10000,
  "seed": 42,
  "dt_max": 0.05,
  "bridge_correction": true,
  "method": "crude",
  "output_dir": "OUT"
}"#;

fn main() -> levy_passage::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("levy-passage-example").display().to_string());
    let cfg = ExperimentConfig::from_json(&CONFIG.replace("OUT", &out))?;
    let run = run_experiment(&cfg)?;
    let f = &run.fit.fit;
    println!("config hash {}", run.config_hash);
    println!("delta_hat = {:.4} ± {:.4} over {} horizons", f.delta_hat, f.stderr, f.points);
    let plot = emit_plot_data(&run)?;
    println!("curve  {}", run.curve_path().display());
    println!("plot   {} and {}", plot.csv.display(), plot.script.display());
    Ok(())
}
