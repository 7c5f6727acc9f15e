//! The auxiliary functions behind the exponent bounds, evaluated in the log
//! domain, and a numerical check of the two induction inequalities built on
//! them.
//!
//! Arguments are passed as `ln x` in the `ln_*` variants because the
//! interesting region (`x = T^{-δ}` for large `T`) underflows `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{iteration_count, Variant};
use crate::{Error, Result};

/// Constants of the bound functions. `l2_norm_sq` is `‖f′‖²` on `[1, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofConstants {
    pub c1: f64,
    pub c2: f64,
    pub beta: f64,
    pub l2_norm_sq: f64,
}

impl Default for ProofConstants {
    fn default() -> Self {
        ProofConstants { c1: 1.0, c2: 1.0, beta: 0.5, l2_norm_sq: 1.0 }
    }
}

impl ProofConstants {
    pub fn new(c1: f64, c2: f64, beta: f64, l2_norm_sq: f64) -> Result<Self> {
        let pc = ProofConstants { c1, c2, beta, l2_norm_sq };
        pc.validate()?;
        Ok(pc)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.c1) && pos(self.c2) && pos(self.l2_norm_sq)) {
            return Err(Error::arg("c1, c2 and l2_norm_sq must be positive and finite"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::arg(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        Ok(())
    }

    fn a(&self) -> f64 {
        self.c1 * self.l2_norm_sq
    }

    fn c2l(&self) -> f64 {
        self.c2 * self.l2_norm_sq
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HVariant {
    /// `y ↦ H(βy)` with the decreasing `H`.
    BetaNegative,
    /// `y ↦ H(2y)` with the increasing `H`.
    TwoPositive,
}

fn check_ln(lx: f64) -> Result<()> {
    if lx.is_nan() || lx > 0.0 || lx == f64::NEG_INFINITY {
        return Err(Error::domain(format!("argument must lie in (0, 1], got ln x = {lx}")));
    }
    Ok(())
}

fn to_ln(x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::domain(format!("argument must lie in (0, 1], got {x}")));
    }
    Ok(x.ln())
}

/// `ln H(x)` for `H(x) = x·exp(−√(c1‖f′‖² ln(1/x)) − c2‖f′‖²)`.
pub fn ln_h_negative(pc: &ProofConstants, lx: f64) -> Result<f64> {
    check_ln(lx)?;
    Ok(lx - (pc.a() * -lx).sqrt() - pc.c2l())
}

/// `ln H(x)` for `H(x) = x·exp(√(c1‖f′‖² ln(1/x)))`.
pub fn ln_h_positive(pc: &ProofConstants, lx: f64) -> Result<f64> {
    check_ln(lx)?;
    Ok(lx + (pc.a() * -lx).sqrt())
}

pub fn eval_h_negative(pc: &ProofConstants, x: f64) -> Result<f64> {
    Ok(ln_h_negative(pc, to_ln(x)?)?.exp())
}

pub fn eval_h_positive(pc: &ProofConstants, x: f64) -> Result<f64> {
    Ok(ln_h_positive(pc, to_ln(x)?)?.exp())
}

/// `ln` of the `n`-fold iterate of `y ↦ H(βy)` or `y ↦ H(2y)` started at `x`.
///
/// Fails with [`Error::IterateEscaped`] when an argument or value leaves
/// `(0, 1]`; `level` is the step (1-based) at which that happened.
pub fn ln_iterate_h(variant: HVariant, pc: &ProofConstants, n: usize, lx: f64) -> Result<f64> {
    check_ln(lx)?;
    let mut ly = lx;
    for level in 1..=n {
        let (arg, next) = match variant {
            HVariant::BetaNegative => {
                let arg = ly + pc.beta.ln();
                (arg, ln_h_negative(pc, arg))
            }
            HVariant::TwoPositive => {
                let arg = ly + std::f64::consts::LN_2;
                if arg > 0.0 {
                    return Err(Error::IterateEscaped { level, value: arg.exp() });
                }
                (arg, ln_h_positive(pc, arg))
            }
        };
        debug_assert!(arg <= 0.0);
        ly = next?;
        if ly > 0.0 || ly == f64::NEG_INFINITY {
            return Err(Error::IterateEscaped { level, value: ly.exp() });
        }
    }
    Ok(ly)
}

pub fn iterate_h(variant: HVariant, pc: &ProofConstants, n: usize, x: f64) -> Result<f64> {
    Ok(ln_iterate_h(variant, pc, n, to_ln(x)?)?.exp())
}

/// `ln W_n(x) = ln x + n ln β − n c2‖f′‖²`.
pub fn ln_w(pc: &ProofConstants, n: usize, lx: f64) -> f64 {
    let n = n as f64;
    lx + n * pc.beta.ln() - n * pc.c2l()
}

/// `ln Z_n(x) = (n−1)√(c1‖f′‖² 2^{n−2} ln(x^{−1}β^{−2})) − c2‖f′‖²`.
pub fn ln_z(pc: &ProofConstants, n: usize, lx: f64) -> f64 {
    let n = n as f64;
    let inner = pc.a() * 2f64.powf(n - 2.0) * (-lx - 2.0 * pc.beta.ln());
    (n - 1.0) * inner.sqrt() - pc.c2l()
}

/// Log of both sides of the lower induction bound
/// `H^n_β(x) ≥ W_n(x)·exp(−n√(c1‖f′‖² ln(W_n(x)^{−1} Z_n(x))))`.
pub fn indi_sides(pc: &ProofConstants, n: usize, lx: f64) -> Result<(f64, f64)> {
    let lhs = ln_iterate_h(HVariant::BetaNegative, pc, n, lx)?;
    let lw = ln_w(pc, n, lx);
    let rhs = lw - n as f64 * (pc.a() * (ln_z(pc, n, lx) - lw)).sqrt();
    Ok((lhs, rhs))
}

/// Log of both sides of the upper induction bound
/// `H^n_2(2x) ≤ 2^n·x·exp(n√(c1‖f′‖² ln(1/x)))`, where the left side is the
/// `n`-fold iterate of `y ↦ H(2y)` at `x`.
pub fn induct_sides(pc: &ProofConstants, n: usize, lx: f64) -> Result<(f64, f64)> {
    let lhs = ln_iterate_h(HVariant::TwoPositive, pc, n, lx)?;
    let nf = n as f64;
    let rhs = nf * std::f64::consts::LN_2 + lx + nf * (pc.a() * -lx).sqrt();
    Ok((lhs, rhs))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> bool) -> f64 {
    // f(lo) false, f(hi) true
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
    }
    hi
}

/// `ln x*` such that `H(x) ≥ x²` for the decreasing `H` whenever `x ≤ x*`.
pub fn square_crossover(pc: &ProofConstants) -> f64 {
    let holds = |u: f64| ln_h_negative(pc, -u).map(|h| h >= -2.0 * u).unwrap_or(false);
    let mut hi = 1.0;
    while !holds(hi) {
        hi *= 2.0;
    }
    // the gap u − √(au) − c2‖f′‖² is negative then increasing, so the root is unique
    -bisect(0.0, hi, holds)
}

/// `ln y*` such that the increasing `H` is increasing on `(0, y*]`, located
/// by bisection on the sign of a centred difference of `ln H` in `ln y`.
pub fn positive_monotone_threshold(pc: &ProofConstants) -> f64 {
    let increasing = |u: f64| {
        let h = 1e-6 * u;
        let up = ln_h_positive(pc, -u + h).unwrap_or(f64::NAN);
        let down = ln_h_positive(pc, -u - h).unwrap_or(f64::NAN);
        up > down
    };
    let mut hi = 1.0;
    while !increasing(hi) {
        hi *= 2.0;
    }
    -bisect(0.0, hi, increasing)
}

/// The smallest `k` with `ln^k(T) ≤ 1`.
pub fn iterated_log_star(t: f64) -> Result<u32> {
    if !(t > 0.0) || t.is_infinite() {
        return Err(Error::domain(format!("ln* needs T in (0, ∞), got {t}")));
    }
    let mut k = 0;
    let mut v = t;
    while v > 1.0 {
        v = v.ln();
        k += 1;
    }
    Ok(k)
}

pub const MAX_SAMPLED_LEVEL: usize = 30;
const REL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Witness {
    pub variant: HVariant,
    pub n: usize,
    /// `x` itself; `0` when it underflows, see `ln_x`.
    pub x: f64,
    pub ln_x: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ln_lhs: f64,
    pub ln_rhs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SquareCheck {
    pub ln_threshold: f64,
    pub samples: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InequalityReport {
    pub constants: ProofConstants,
    pub horizon: f64,
    /// In-validity checks performed, over both variants.
    pub checked: usize,
    pub violations: Vec<Witness>,
    /// Out-of-validity samples where the inequality failed.
    pub out_of_validity: Vec<Witness>,
    pub out_of_validity_count: usize,
    /// `ln x` below which `H(x) ≥ x²` for the decreasing `H`.
    pub square: SquareCheck,
    /// `ln y` below which the increasing `H` is increasing.
    pub ln_monotone_threshold: f64,
    pub iteration_count_negative: Option<u32>,
    pub iteration_count_positive: Option<u32>,
    pub log_star: u32,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.square.failures == 0
    }
}

/// Validity of the lower bound: every argument `βy` along the iteration
/// lies where `H(y) ≥ y²`. The iterates decrease, so the first one decides.
fn indi_valid(pc: &ProofConstants, lx: f64, ln_sq: f64) -> bool {
    lx + pc.beta.ln() <= ln_sq
}

/// Validity of the upper bound: each majorant `2^k x e^{(k−1)s}`,
/// `s = √(c1‖f′‖² ln(1/x))`, stays inside the monotone region of `H`.
/// Samples whose iterate leaves `(0, 1]` (possible since `H(y) > 1` for
/// `y > e^{−c1‖f′‖²}`) are also out of validity.
fn induct_valid(pc: &ProofConstants, n: usize, lx: f64, ln_mono: f64) -> bool {
    let s = (pc.a() * -lx).sqrt();
    (1..=n).all(|k| {
        let k = k as f64;
        k * std::f64::consts::LN_2 + lx + (k - 1.0) * s <= ln_mono
    })
}

/// Samples `(n, x)` with `n ≤ 30` and `ln(1/x)` log-uniform on
/// `[1e-4, 1e5]` until `samples` in-validity checks per variant are done,
/// and reports every failure. The horizon only feeds the reported iteration
/// counts (with `κ = 1`).
pub fn verify_inequalities(
    pc: &ProofConstants,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> Result<InequalityReport> {
    pc.validate()?;
    let ln_sq = square_crossover(pc);
    let ln_mono = positive_monotone_threshold(pc);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..=MAX_SAMPLED_LEVEL);
        let lu = rng.random_range(-4.0f64..5.0) * std::f64::consts::LN_10;
        (n, -lu.exp())
    };

    let mut checked = 0;
    let mut violations = Vec::new();
    let mut out_of_validity = Vec::new();
    let mut out_count = 0;
    let witness = |variant, n, lx: f64, (ll, lr): (f64, f64)| Witness {
        variant,
        n,
        x: lx.exp(),
        ln_x: lx,
        lhs: ll.exp(),
        rhs: lr.exp(),
        ln_lhs: ll,
        ln_rhs: lr,
    };

    for variant in [HVariant::BetaNegative, HVariant::TwoPositive] {
        let mut done = 0;
        let mut attempts = 0;
        while done < samples && attempts < 1000 * samples.max(1) {
            attempts += 1;
            let (n, lx) = draw(&mut rng);
            let (valid, sides) = match variant {
                HVariant::BetaNegative => (indi_valid(pc, lx, ln_sq), indi_sides(pc, n, lx)),
                HVariant::TwoPositive => (induct_valid(pc, n, lx, ln_mono), induct_sides(pc, n, lx)),
            };
            // an iterate that leaves (0, 1] has no value to compare
            let valid = valid && sides.is_ok();
            let holds = match (&sides, variant) {
                (Ok((l, r)), HVariant::BetaNegative) => *l >= r + (-REL_SLACK).ln_1p(),
                (Ok((l, r)), HVariant::TwoPositive) => *l <= r + REL_SLACK.ln_1p(),
                (Err(_), _) => false,
            };
            let sides = sides.unwrap_or((f64::NAN, f64::NAN));
            if valid {
                done += 1;
                checked += 1;
                if !holds {
                    violations.push(witness(variant, n, lx, sides));
                }
            } else {
                out_count += 1;
                if !holds {
                    out_of_validity.push(witness(variant, n, lx, sides));
                }
            }
        }
    }

    let mut failures = 0;
    for _ in 0..samples {
        let u = -ln_sq * (1.0 + rng.random_range(0.0f64..4.0) * std::f64::consts::LN_10).exp();
        let u = u.max(-ln_sq);
        if ln_h_negative(pc, -u)? < -2.0 * u {
            failures += 1;
        }
    }

    Ok(InequalityReport {
        constants: *pc,
        horizon,
        checked,
        violations,
        out_of_validity,
        out_of_validity_count: out_count,
        square: SquareCheck { ln_threshold: ln_sq, samples, failures },
        ln_monotone_threshold: ln_mono,
        iteration_count_negative: iteration_count(Variant::NegativeCase, 1.0, horizon).ok(),
        iteration_count_positive: iteration_count(Variant::PositiveCase, 1.0, horizon).ok(),
        log_star: iterated_log_star(horizon)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assume, proptest};

    fn pc(c1: f64, c2: f64, beta: f64, l2: f64) -> ProofConstants {
        ProofConstants { c1, c2, beta, l2_norm_sq: l2 }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn h_values() {
        let p = ProofConstants::default();
        assert!(rel(eval_h_negative(&p, 1.0).unwrap(), (-1.0f64).exp()) < 1e-15);
        let p0 = pc(1.0, 1e-300, 0.5, 1.0);
        let h = eval_h_negative(&p0, (-1.0f64).exp()).unwrap();
        assert!(rel(h, (-2.0f64).exp()) < 1e-14, "{h}");
        assert_eq!(eval_h_positive(&p, 1.0).unwrap(), 1.0);
        let h = eval_h_positive(&p, (-4.0f64).exp()).unwrap();
        assert!(rel(h, (-2.0f64).exp()) < 1e-14, "{h}");
        assert!(eval_h_negative(&p, 0.0).is_err());
        assert!(eval_h_positive(&p, 1.5).is_err());
    }

    #[test]
    fn iterate_base_cases() {
        let p = ProofConstants::default();
        assert_eq!(iterate_h(HVariant::BetaNegative, &p, 0, 0.3).unwrap(), 0.3);
        let one = iterate_h(HVariant::TwoPositive, &p, 1, 0.01).unwrap();
        assert!(rel(one, eval_h_positive(&p, 0.02).unwrap()) < 1e-14);
    }

    #[test]
    fn triple_iterate_matches_unrolled_formula() {
        let p = pc(1.0, 1.0, 0.5, 0.25);
        let h = |x: f64| x * (-(0.25 * (1.0 / x).ln()).sqrt() - 0.25).exp();
        let want = h(0.5 * h(0.5 * h(0.5 * 0.01)));
        let got = iterate_h(HVariant::BetaNegative, &p, 3, 0.01).unwrap();
        assert!(rel(got, want) < 1e-12, "{got} vs {want}");

        let g = |x: f64| x * (0.25 * (1.0 / x).ln()).sqrt().exp();
        let want = g(2.0 * g(2.0 * g(2.0 * 0.01)));
        let got = iterate_h(HVariant::TwoPositive, &p, 3, 0.01).unwrap();
        assert!(rel(got, want) < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn positive_iterate_escape_reports_level() {
        let p = ProofConstants::default();
        match iterate_h(HVariant::TwoPositive, &p, 10, 0.1) {
            Err(Error::IterateEscaped { level, value }) => {
                assert!(level >= 1 && value > 1.0, "{level} {value}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn thresholds_match_closed_forms() {
        let p = pc(1.0, 1.0, 0.5, 0.125);
        let (a, c) = (0.125f64, 0.125f64);
        let u = ((a.sqrt() + (a + 4.0 * c).sqrt()) / 2.0).powi(2);
        assert!(rel(-square_crossover(&p), u) < 1e-9);
        assert!(rel(-positive_monotone_threshold(&p), a / 4.0) < 1e-6);
    }

    #[test]
    fn base_level_has_no_violations() {
        let p = ProofConstants::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(1e-12..0.1);
            let lx = x.ln();
            let (l, r) = indi_sides(&p, 1, lx).unwrap();
            assert!(l >= r - 1e-9, "indi n=1 x={x}: {l} < {r}");
            let (l, r) = induct_sides(&p, 1, lx).unwrap();
            assert!(l <= r + 1e-9, "induct n=1 x={x}: {l} > {r}");
        }
    }

    #[test]
    fn report_is_clean_inside_validity() {
        for l2 in [0.125, 1.0] {
            let p = pc(1.0, 1.0, 0.5, l2);
            let rep = verify_inequalities(&p, 65536.0, 1000, 7).unwrap();
            assert_eq!(rep.checked, 2000);
            assert!(rep.violations.is_empty(), "{:?}", &rep.violations[..rep.violations.len().min(3)]);
            assert_eq!(rep.square.failures, 0);
            assert_eq!(rep.iteration_count_negative, Some(7));
            assert_eq!(rep.iteration_count_positive, Some(10));
            assert_eq!(rep.log_star, 3);
        }
    }

    #[test]
    fn large_x_is_flagged_out_of_validity() {
        let p = ProofConstants::default();
        let ln_mono = positive_monotone_threshold(&p);
        assert!(!induct_valid(&p, 5, -0.5, ln_mono));
        let rep = verify_inequalities(&p, 1e6, 200, 3).unwrap();
        assert!(rep.out_of_validity_count > 0);
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["checked", "violations", "out_of_validity"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn log_star_values() {
        assert_eq!(iterated_log_star(1.0).unwrap(), 0);
        assert_eq!(iterated_log_star(std::f64::consts::E).unwrap(), 1);
        assert_eq!(iterated_log_star(1e6).unwrap(), 3);
        assert_eq!(iterated_log_star(65536.0).unwrap(), 3);
        assert!(iterated_log_star(0.0).is_err());
    }

    #[test]
    fn iteration_count_is_doubly_logarithmic() {
        for k in 8..=60 {
            let t = 2f64.powi(k);
            let lln = t.ln().ln();
            for (v, r) in [(Variant::NegativeCase, 1.5f64), (Variant::PositiveCase, 4.0 / 3.0)] {
                let n = iteration_count(v, 1.0, t).unwrap() as f64;
                let bound = (lln - std::f64::consts::LN_2.ln()) / r.ln() + 1.0;
                assert!(n <= bound, "T = 2^{k}: n = {n} > {bound}");
            }
        }
    }

    proptest! {
        #[test]
        fn h_negative_is_monotone_and_below_identity(a in 1e-12f64..1.0, b in 1e-12f64..1.0) {
            let p = ProofConstants::default();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(lo < hi);
            let (hl, hh) = (eval_h_negative(&p, lo).unwrap(), eval_h_negative(&p, hi).unwrap());
            prop_assert!(hl < hh);
            prop_assert!(hl <= lo && hh <= hi);
        }

        #[test]
        fn h_positive_ratio_non_increasing(a in 1e-12f64..=1.0, b in 1e-12f64..=1.0) {
            let p = ProofConstants::default();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let r = |x: f64| eval_h_positive(&p, x).unwrap() / x;
            prop_assert!(r(lo) >= r(hi) * (1.0 - 1e-15));
            prop_assert!(r(lo) >= 1.0);
        }

        #[test]
        fn iterates_compose(n in 0usize..15, m in 0usize..15, lu in 0.0f64..8.0) {
            let p = pc(1.0, 1.0, 0.5, 0.25);
            let lx = -(10f64.powf(lu));
            for v in [HVariant::BetaNegative, HVariant::TwoPositive] {
                let whole = ln_iterate_h(v, &p, n + m, lx);
                let inner = ln_iterate_h(v, &p, m, lx);
                if let (Ok(w), Ok(i)) = (whole, inner) {
                    let outer = ln_iterate_h(v, &p, n, i).unwrap();
                    prop_assert!((w - outer).abs() <= 1e-12 * w.abs().max(1.0));
                }
            }
        }
    }
}
