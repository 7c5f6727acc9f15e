//! Estimates a survival curve and fits its decay exponent.
//!
//! cargo run --release --example survival_exponent -- [n_paths]

use levy_passage::boundary::{Boundary, Sign};
use levy_passage::levy_model::{martingale_normalize, LevyTriplet};
use levy_passage::oracles::bm_no_exit_exact;
use levy_passage::passage_mc::{estimate_survival, fit_exponent, survival_curve};
use levy_passage::simulate::SimConfig;

fn main() -> levy_passage::Result<()> {
    let n: u64 = std::env::args().nth(1).map_or(20_000, |s| s.parse().expect("n_paths"));
    let bm = LevyTriplet::brownian(1.0);
    let cfg = SimConfig::new(0.05, true);

    let e = estimate_survival(&bm, &Boundary::constant(1.0), 4.0, n, &cfg, 1)?;
    println!(
        "BM below 1 up to T = 4: {:.5} [{:.5}, {:.5}], exact {:.5}",
        e.p_hat,
        e.ci_low,
        e.ci_high,
        bm_no_exit_exact(1.0, 1.0, 4.0)?
    );

    let t = martingale_normalize(&bm.clone().with_atom(-0.5, 1.0))?;
    for (name, b) in [
        ("1", Boundary::constant(1.0)),
        ("1 − t^0.25", Boundary::power(0.25, Sign::Minus, 1.0)?),
        ("1 + t^0.25", Boundary::power(0.25, Sign::Plus, 1.0)?),
    ] {
        let c = survival_curve(&t, &b, 1.0, 1000.0, 4.0, n, &cfg, 7)?;
        let f = fit_exponent(&c)?;
        println!(
            "boundary {name:<11} p(T=1000) = {:.5}  delta_hat = {:.3} ± {:.3} over [{:.0}, {:.0}]",
            c.estimates.last().copied().unwrap_or(0.0),
            f.delta_hat,
            f.stderr,
            f.window.0,
            f.window.1
        );
    }
    Ok(())
}
