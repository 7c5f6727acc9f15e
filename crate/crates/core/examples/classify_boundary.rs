//! Integral tests, growth bounds and the iterated levels of a boundary.

use levy_passage::boundary::{
    growth_props, iteration_count, l2_derivative_test, uchiyama_test, Boundary, IteratedBoundary, Sign, Variant,
};

fn main() -> levy_passage::Result<()> {
    for g in [0.0, 0.25, 0.49, 0.5, 0.75] {
        let b = Boundary::power(g, Sign::Plus, 0.0)?;
        println!(
            "t^{g:<5} uchiyama {:?}  ‖f′‖² {:?}",
            uchiyama_test(&b, 0.0)?,
            l2_derivative_test(&b, 0.0)?
        );
    }
    let wiggly = Boundary::custom("ln(1+t)", |t| (1.0 + t).ln(), |t| 1.0 / (1.0 + t));
    println!("ln(1+t): uchiyama {:?}", uchiyama_test(&wiggly, 1e8)?);

    let falling = Boundary::power(0.25, Sign::Minus, 1.0)?;
    println!("growth of 1 − t^0.25 on [1, 1e6]: {:?}", growth_props(&falling, 1e6)?);

    let horizon = 65536.0;
    let f = Boundary::power(0.25, Sign::Plus, 0.0)?;
    for variant in [Variant::NegativeCase, Variant::PositiveCase] {
        let n = iteration_count(variant, 1.0, horizon)? as usize;
        let ib = IteratedBoundary::new(f.clone(), horizon, variant, 1.0)?;
        print!("{variant:?}: n(T) = {n}; f_k(T) =");
        for k in 0..=n.min(4) {
            print!(" {:.3}", ib.eval(k, horizon)?);
        }
        println!();
    }
    Ok(())
}
