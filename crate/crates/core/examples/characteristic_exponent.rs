//! Builds a triplet, validates it, recentres it and prints Ψ(u).

use levy_passage::levy_model::{char_exponent, martingale_normalize, validate_triplet, LevyTriplet};

fn main() -> levy_passage::Result<()> {
    let t = LevyTriplet::brownian(1.0)
        .with_atom(-0.5, 1.0)
        .with_atom(2.0, 0.1)
        .with_density_bin(-0.8, -0.2, 0.5);
    println!("triplet: {}", t.to_json()?);
    println!("valid: {}", validate_triplet(&t).is_empty());
    println!("mean = {:.6}, variance = {:.6}", t.mean()?, t.variance());

    let m = martingale_normalize(&t)?;
    println!("normalized drift = {:.6} (raw drift {:.6})", m.drift, m.raw_drift());
    for u in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let psi = char_exponent(&m, u)?;
        println!("Ψ({u}) = {:.6} {:+.6}i", psi.re, psi.im);
    }

    let bad = LevyTriplet::brownian(-1.0).with_atom(0.0, 1.0);
    println!("invalid triplet: {}", validate_triplet(&bad));
    Ok(())
}
