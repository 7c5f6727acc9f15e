//! Evaluates the bound functions and checks the induction inequalities.
//!
//! cargo run --example proof_bounds -- [l2_norm_sq] [samples]

use levy_passage::bound_machinery::{
    iterate_h, iterated_log_star, verify_inequalities, HVariant, ProofConstants,
};
use levy_passage::boundary::{iteration_count, Variant};

fn main() -> levy_passage::Result<()> {
    let mut args = std::env::args().skip(1);
    let l2: f64 = args.next().map_or(0.125, |s| s.parse().expect("l2_norm_sq"));
    let samples: usize = args.next().map_or(1000, |s| s.parse().expect("samples"));
    let pc = ProofConstants { l2_norm_sq: l2, ..Default::default() };

    for n in 0..=5 {
        println!(
            "n = {n}: H^n_beta(0.01) = {:.6e}  H^n_2(0.01) = {}",
            iterate_h(HVariant::BetaNegative, &pc, n, 0.01)?,
            iterate_h(HVariant::TwoPositive, &pc, n, 0.01)
                .map_or_else(|e| e.to_string(), |v| format!("{v:.6e}")),
        );
    }
    for t in [65536.0, 1e6] {
        println!(
            "T = {t:e}: n_neg = {}, n_pos = {}, ln* = {}",
            iteration_count(Variant::NegativeCase, 1.0, t)?,
            iteration_count(Variant::PositiveCase, 1.0, t)?,
            iterated_log_star(t)?
        );
    }

    let rep = verify_inequalities(&pc, 65536.0, samples, 1)?;
    println!(
        "checked {} samples: {} violations, {} out of validity ({} failing there)",
        rep.checked,
        rep.violations.len(),
        rep.out_of_validity_count,
        rep.out_of_validity.len()
    );
    println!(
        "H(x) >= x^2 below ln x = {:.4}; increasing H monotone below ln y = {:.4}",
        rep.square.ln_threshold, rep.ln_monotone_threshold
    );
    if let Some(w) = rep.out_of_validity.iter().find(|w| w.ln_lhs.is_finite()) {
        println!("example out-of-validity failure: {w:?}");
    }
    Ok(())
}
