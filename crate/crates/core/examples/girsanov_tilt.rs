//! Tilted sampling against a falling boundary: weights, compensator and
//! the importance-sampling estimate next to crude Monte Carlo.
//!
//! cargo run --release --example girsanov_tilt

use levy_passage::boundary::{Boundary, Sign};
use levy_passage::levy_model::{martingale_normalize, LevyTriplet};
use levy_passage::passage_mc::estimate_survival;
use levy_passage::rng::RngStamp;
use levy_passage::simulate::SimConfig;
use levy_passage::tilt_is::{
    check_g_bound, homogenized_compensator, is_estimate_survival, make_tilt, sample_tilted_path, Side,
};

fn main() -> levy_passage::Result<()> {
    let t = martingale_normalize(&LevyTriplet::brownian(1.0).with_atom(-0.5, 1.0))?;
    let b = Boundary::power(0.25, Sign::Minus, 1.0)?;
    let spec = make_tilt(&t, &b, Side::Negative, 1.0)?;
    println!(
        "support {:?}, m = {}, extra jump rate in operational time = {}",
        spec.support,
        spec.m,
        spec.extra_rate()
    );

    let cfg = SimConfig::new(0.1, true);
    let n = 10_000u64;
    let mean = (0..n)
        .map(|i| sample_tilted_path(&t, &spec, 64.0, &cfg, RngStamp::for_path(3, 0, i)).map(|s| s.log_weight.exp()))
        .sum::<levy_passage::Result<f64>>()?
        / n as f64;
    println!("mean likelihood ratio over {n} tilted paths: {mean:.4}");

    let z = homogenized_compensator(&t, &spec, 64.0, &cfg, RngStamp::new(3, 99))?;
    println!("homogenized compensator at T = 64: {:+.4}", z.values.last().copied().unwrap_or(0.0));

    let g = check_g_bound(spec.slope(1.0) * 0.5 / spec.m, 1000);
    println!("g bound on [0, {:.3}]: nonnegative = {}, c = {:.4}", g.u_max, g.nonnegative, g.c_tilde);

    for horizon in [16.0, 64.0, 256.0] {
        let crude = estimate_survival(&t, &b, horizon, 20_000, &cfg, 5)?;
        let is = is_estimate_survival(&t, &b, &spec, horizon, 20_000, &cfg, 6)?;
        println!(
            "T = {horizon:>5}: crude {:.5} [{:.5}, {:.5}]   tilted {:.5} [{:.5}, {:.5}] ESS {:.0}",
            crude.p_hat, crude.ci_low, crude.ci_high, is.estimate.p_hat, is.estimate.ci_low, is.estimate.ci_high, is.ess
        );
    }
    Ok(())
}
