//! Samples a few paths, dumps one to CSV and checks survival below a boundary.
//!
//! cargo run --example simulate_paths -- [out_dir]

use std::path::PathBuf;

use levy_passage::boundary::{Boundary, Sign};
use levy_passage::levy_model::{martingale_normalize, LevyTriplet};
use levy_passage::rng::RngStamp;
use levy_passage::simulate::{no_exit_indicator, sample_path, sample_stable_increment, SimConfig};

fn main() -> levy_passage::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let t = martingale_normalize(&LevyTriplet::brownian(1.0).with_atom(-0.5, 1.0))?;
    let b = Boundary::power(0.25, Sign::Plus, 1.0)?;
    let cfg = SimConfig::new(0.01, true);

    for i in 0..5 {
        let p = sample_path(&t, 10.0, &cfg, RngStamp::for_path(1, 0, i))?;
        let s = no_exit_indicator(&p, &b, &cfg);
        println!(
            "path {i}: X(10) = {:+.4}, {} jumps, survives = {}, bridge weight = {:.4}",
            p.values.last().copied().unwrap_or(0.0),
            p.jump_records.len(),
            s.indicator == 1,
            s.weight
        );
    }

    let p = sample_path(&t, 10.0, &cfg, RngStamp::for_path(1, 0, 0))?;
    let (values, jumps) = (out.join("path_values.csv"), out.join("path_jumps.csv"));
    p.write_csv(&values, &jumps)?;
    println!("wrote {} and {}", values.display(), jumps.display());

    let z: Vec<f64> = (0..5)
        .map(|i| sample_stable_increment(1.5, 1.0, -1.0, 1.0, RngStamp::new(2, i)))
        .collect::<Result<_, _>>()?;
    println!("stable(1.5, skew −1) increments: {z:.3?}");
    Ok(())
}
