//! Reference values: closed forms, Spitzer ρ, calibration grid, lemma battery.
//!
//! cargo run --release --example oracle_checks

use levy_passage::levy_model::LevyTriplet;
use levy_passage::oracles::{
    bm_no_exit_exact, calibration_grid, lemma_checks, spitzer_rho_estimate, stable_rho, LemmaConfig,
};

fn main() -> levy_passage::Result<()> {
    println!("2Φ(1) − 1 = {:.6}", bm_no_exit_exact(1.0, 1.0, 1.0)?);
    println!("ρ(1.5, −1) = {:.6}", stable_rho(1.5, -1.0)?);

    let stable = LevyTriplet::zero().with_stable(1.5, 1.0, -1.0);
    for r in spitzer_rho_estimate(&stable, &[1.0, 100.0], 20_000, 1)? {
        println!("P(X({}) > 0) ≈ {:.4} [{:.4}, {:.4}]", r.t, r.estimate.p_hat, r.estimate.ci_low, r.estimate.ci_high);
    }

    for row in calibration_grid(&[0.5, 1.0], &[1.0, 16.0], 20_000, 0.01, 2)? {
        println!("a = {}, T = {:>4}: exact {:.5}, estimate {:.5}, z = {:+.2}", row.a, row.horizon, row.exact, row.p_hat, row.z);
    }

    let cfg = LemmaConfig {
        association_trials: 5,
        association_paths: 5_000,
        helpln_paths: 5_000,
        bbgr_paths: 10_000,
        coup_paths: 5_000,
        ..LemmaConfig::default()
    };
    let rep = lemma_checks(&cfg)?;
    println!(
        "lemma checks: association {} / {} violations, helpln {}, exceedance {}, plateau {} (floor {:.3})",
        rep.association_violations,
        rep.association.len(),
        rep.helpln_passed(),
        rep.exceedance.holds,
        rep.plateau.holds,
        rep.plateau.floor
    );
    Ok(())
}
