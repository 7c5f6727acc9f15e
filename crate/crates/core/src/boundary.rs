//! Moving boundaries, their integral tests and the iterated boundaries `f_n`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quadrature::{classify_tail, IntegralClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A boundary given by user code. Must supply its own derivative.
#[derive(Clone)]
pub struct CustomBoundary {
    pub name: String,
    eval: RealFn,
    deriv: RealFn,
}

/// A deterministic function `t ↦ f(t)` on `t ≥ 0` together with `f′`.
#[derive(Clone)]
pub enum Boundary {
    Constant(f64),
    /// `offset ± t^γ`.
    Power {
        gamma: f64,
        sign: Sign,
        offset: f64,
    },
    Custom(CustomBoundary),
}

/// The serializable boundary kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundarySpec {
    Constant {
        value: f64,
    },
    Power {
        gamma: f64,
        sign: Sign,
        #[serde(default)]
        offset: f64,
    },
}

impl Boundary {
    pub fn constant(value: f64) -> Self {
        Boundary::Constant(value)
    }

    /// `offset ± t^γ`.
    pub fn power(gamma: f64, sign: Sign, offset: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) || !offset.is_finite() {
            return Err(Error::InvalidBoundary(format!(
                "power boundary needs finite gamma >= 0 and finite offset, got gamma={gamma}, offset={offset}"
            )));
        }
        Ok(Boundary::Power {
            gamma,
            sign,
            offset,
        })
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Boundary::Custom(CustomBoundary {
            name: name.into(),
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Boundary::Constant(v) => *v,
            Boundary::Power {
                gamma,
                sign,
                offset,
            } => offset + sign.factor() * t.powf(*gamma),
            Boundary::Custom(c) => (c.eval)(t),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            Boundary::Constant(_) => 0.0,
            Boundary::Power { gamma, sign, .. } => {
                if *gamma == 0.0 {
                    0.0
                } else {
                    sign.factor() * gamma * t.powf(gamma - 1.0)
                }
            }
            Boundary::Custom(c) => (c.deriv)(t),
        }
    }

    pub fn spec(&self) -> Option<BoundarySpec> {
        match *self {
            Boundary::Constant(value) => Some(BoundarySpec::Constant { value }),
            Boundary::Power {
                gamma,
                sign,
                offset,
            } => Some(BoundarySpec::Power {
                gamma,
                sign,
                offset,
            }),
            Boundary::Custom(_) => None,
        }
    }

    pub fn from_spec(spec: BoundarySpec) -> Result<Self> {
        match spec {
            BoundarySpec::Constant { value } if value.is_finite() => Ok(Boundary::Constant(value)),
            BoundarySpec::Constant { value } => Err(Error::InvalidBoundary(format!(
                "constant boundary value {value} is not finite"
            ))),
            BoundarySpec::Power {
                gamma,
                sign,
                offset,
            } => Boundary::power(gamma, sign, offset),
        }
    }

    /// `−f`, mirroring the problem through the origin.
    pub fn negated(&self) -> Boundary {
        match self.clone() {
            Boundary::Constant(v) => Boundary::Constant(-v),
            Boundary::Power {
                gamma,
                sign,
                offset,
            } => Boundary::Power {
                gamma,
                sign: match sign {
                    Sign::Plus => Sign::Minus,
                    Sign::Minus => Sign::Plus,
                },
                offset: -offset,
            },
            Boundary::Custom(c) => {
                let (e, d) = (c.eval, c.deriv);
                Boundary::custom(format!("-({})", c.name), move |t| -e(t), move |t| -d(t))
            }
        }
    }
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Constant(v) => write!(f, "Constant({v})"),
            Boundary::Power {
                gamma,
                sign,
                offset,
            } => write!(f, "Power {{ gamma: {gamma}, sign: {sign:?}, offset: {offset} }}"),
            Boundary::Custom(c) => write!(f, "Custom({:?})", c.name),
        }
    }
}

impl Serialize for Boundary {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self.spec() {
            Some(spec) => spec.serialize(serializer),
            None => Err(serde::ser::Error::custom(
                "custom boundaries have no JSON form",
            )),
        }
    }
}

impl<'de> Deserialize<'de> for Boundary {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = BoundarySpec::deserialize(deserializer)?;
        Boundary::from_spec(spec).map_err(serde::de::Error::custom)
    }
}

const DEFAULT_QUAD_UPPER: f64 = 1e8;

/// Classifies `∫_1^∞ |f(t)| t^{−3/2} dt`.
pub fn uchiyama_test(b: &Boundary, quad_upper: f64) -> Result<IntegralClass> {
    match *b {
        Boundary::Constant(v) => Ok(IntegralClass::Finite(2.0 * v.abs())),
        Boundary::Power { gamma, .. } if gamma >= 0.5 => Ok(IntegralClass::Infinite),
        Boundary::Power {
            gamma,
            sign,
            offset,
        } => Ok(IntegralClass::Finite(power_uchiyama(
            gamma,
            sign.factor(),
            offset,
        ))),
        Boundary::Custom(_) => {
            let q = if quad_upper > 0.0 { quad_upper } else { DEFAULT_QUAD_UPPER };
            classify_tail(|t| b.eval(t).abs() * t.powf(-1.5), q).ok_or_else(|| {
                Error::InvalidBoundary("boundary is not evaluable on [1, ∞)".into())
            })
        }
    }
}

/// `∫_1^∞ |c + s t^γ| t^{−3/2} dt` for `γ < 1/2`, split at the sign change.
fn power_uchiyama(gamma: f64, s: f64, c: f64) -> f64 {
    if gamma == 0.0 {
        return 2.0 * (c + s).abs();
    }
    // antiderivative of (c + s t^γ) t^{−3/2}, with F(∞) = 0
    let anti = |t: f64| -2.0 * c / t.sqrt() + s * t.powf(gamma - 0.5) / (gamma - 0.5);
    let root = (-c / s).powf(1.0 / gamma);
    if (-c / s) > 0.0 && root > 1.0 {
        (anti(root) - anti(1.0)).abs() + anti(root).abs()
    } else {
        anti(1.0).abs()
    }
}

/// Classifies `∫_1^∞ f′(s)² ds`, returning its value when finite.
pub fn l2_derivative_test(b: &Boundary, quad_upper: f64) -> Result<IntegralClass> {
    match *b {
        Boundary::Constant(_) => Ok(IntegralClass::Finite(0.0)),
        Boundary::Power { gamma, .. } if gamma == 0.0 => Ok(IntegralClass::Finite(0.0)),
        Boundary::Power { gamma, .. } if gamma >= 0.5 => Ok(IntegralClass::Infinite),
        Boundary::Power { gamma, .. } => Ok(IntegralClass::Finite(gamma * gamma / (1.0 - 2.0 * gamma))),
        Boundary::Custom(_) => {
            let q = if quad_upper > 0.0 { quad_upper } else { DEFAULT_QUAD_UPPER };
            classify_tail(|t| b.deriv(t).powi(2), q).ok_or_else(|| {
                Error::InvalidBoundary("derivative is not evaluable on [1, ∞)".into())
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub prop1_holds: bool,
    /// sup of `f(t)/t` over the grid.
    pub prop1_c: f64,
    pub prop2_holds: bool,
    /// sup of `√t f′(s)` over grid pairs `t ≤ s`.
    pub prop2_c: f64,
}

const GROWTH_GRID: usize = 1024;

/// Checks `f(T) ≤ cT` and `√t f′(s) ≤ c̃` (`1 ≤ t ≤ s ≤ T`) on a log grid.
///
/// A property is reported as holding when the supremum over the upper half of
/// the grid does not exceed the supremum over the lower half, i.e. the ratio
/// has stopped growing.
pub fn growth_props(b: &Boundary, horizon: f64) -> Result<GrowthReport> {
    if !(horizon > std::f64::consts::E) {
        return Err(Error::domain(format!("growth_props needs T > e, got {horizon}")));
    }
    let lt = horizon.ln();
    let grid: Vec<f64> = (0..GROWTH_GRID)
        .map(|i| (lt * i as f64 / (GROWTH_GRID - 1) as f64).exp())
        .collect();
    let half = GROWTH_GRID / 2;
    let sup = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let r1: Vec<f64> = grid.iter().map(|&t| b.eval(t) / t).collect();
    // For f′(s) ≥ 0 the sup over t ≤ s sits at t = s; otherwise at t = 1.
    let r2: Vec<f64> = grid
        .iter()
        .map(|&s| {
            let d = b.deriv(s);
            if d >= 0.0 {
                s.sqrt() * d
            } else {
                d
            }
        })
        .collect();
    if r1.iter().chain(&r2).any(|v| v.is_nan()) {
        return Err(Error::InvalidBoundary("boundary not evaluable on [1, T]".into()));
    }
    let holds = |r: &[f64]| {
        let (lo, hi) = (sup(&r[..half]), sup(&r[half..]));
        hi <= lo.max(0.0) * (1.0 + 1e-9) || hi <= 0.0
    };
    Ok(GrowthReport {
        prop1_holds: holds(&r1),
        prop1_c: sup(&r1),
        prop2_holds: holds(&r2),
        prop2_c: sup(&r2).max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    NegativeCase,
    PositiveCase,
}

pub const MAX_LEVEL: usize = 200;

/// The levels `f_0, f_1, …` built from a base boundary and a horizon.
///
/// Every level is `f_n = A_n + D_n` with anchors `A_n = f_n(ln T)` and
/// excesses `D_n(t) = max{0, D_{n−1}(t)^r − floor}`, where
/// `(r, floor) = (2/3, 1)` in the negative case and `(3/4, (ln T)^5)` in the
/// positive case. `D_0(t) = max{0, f(t) − f(ln T)}`.
pub struct IteratedBoundary {
    base: Boundary,
    horizon: f64,
    variant: Variant,
    kappa_delta: f64,
    log_t: f64,
    switch: Vec<OnceLock<Option<f64>>>,
}

impl fmt::Debug for IteratedBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IteratedBoundary")
            .field("base", &self.base)
            .field("horizon", &self.horizon)
            .field("variant", &self.variant)
            .field("kappa_delta", &self.kappa_delta)
            .finish()
    }
}

impl IteratedBoundary {
    pub fn new(base: Boundary, horizon: f64, variant: Variant, kappa_delta: f64) -> Result<Self> {
        if !(horizon > std::f64::consts::E) {
            return Err(Error::domain(format!(
                "iterated boundary needs T > e, got {horizon}"
            )));
        }
        if !(kappa_delta >= 0.0) {
            return Err(Error::arg("kappa_delta must be nonnegative"));
        }
        if variant == Variant::NegativeCase && !(base.eval(0.0) < 1.0) {
            return Err(Error::InvalidBoundary(
                "negative case needs f(0) < 1".into(),
            ));
        }
        Ok(IteratedBoundary {
            base,
            horizon,
            variant,
            kappa_delta,
            log_t: horizon.ln(),
            switch: (0..=MAX_LEVEL).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn base(&self) -> &Boundary {
        &self.base
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    fn rate_and_floor(&self) -> (f64, f64) {
        match self.variant {
            Variant::NegativeCase => (2.0 / 3.0, 1.0),
            Variant::PositiveCase => (0.75, self.log_t.powi(5)),
        }
    }

    /// `f_n(ln T)`.
    pub fn anchor(&self, n: usize) -> f64 {
        let f_l = self.base.eval(self.log_t);
        let k = n as f64;
        match self.variant {
            Variant::NegativeCase => f_l + k,
            Variant::PositiveCase => f_l + k * (self.kappa_delta * self.log_t + self.log_t.powi(5)),
        }
    }

    fn check(&self, n: usize, t: f64) -> Result<()> {
        if n > MAX_LEVEL {
            return Err(Error::domain(format!("level {n} exceeds the cap {MAX_LEVEL}")));
        }
        if !(t >= 0.0) {
            return Err(Error::domain(format!("t must be nonnegative, got {t}")));
        }
        Ok(())
    }

    /// `(D_n(t), D_n′(t))`.
    fn excess(&self, n: usize, t: f64) -> (f64, f64) {
        let (r, floor) = self.rate_and_floor();
        let f_l = self.base.eval(self.log_t);
        let ft = self.base.eval(t);
        let (mut d, mut dd) = if ft > f_l {
            (ft - f_l, self.base.deriv(t))
        } else {
            (0.0, 0.0)
        };
        for _ in 0..n {
            let p = d.powf(r);
            if p > floor {
                dd *= r * p / d;
                d = p - floor;
            } else {
                d = 0.0;
                dd = 0.0;
            }
        }
        (d, dd)
    }

    pub fn eval(&self, n: usize, t: f64) -> Result<f64> {
        self.check(n, t)?;
        Ok(self.anchor(n) + self.excess(n, t).0)
    }

    /// `f_n′(t)` by the chain rule through the recursion.
    pub fn deriv(&self, n: usize, t: f64) -> Result<f64> {
        self.check(n, t)?;
        Ok(self.excess(n, t).1)
    }

    /// The point `t̃_n` where `f_n` leaves its plateau, if it does so before `T`.
    pub fn switch_point(&self, n: usize) -> Result<Option<f64>> {
        self.check(n, 0.0)?;
        Ok(*self.switch[n].get_or_init(|| {
            let (mut lo, mut hi) = (self.log_t, self.horizon);
            if self.excess(n, hi).0 <= 0.0 {
                return None;
            }
            if self.excess(n, lo).0 > 0.0 {
                return Some(lo);
            }
            while hi - lo > 1e-9 * hi {
                let mid = 0.5 * (lo + hi);
                if self.excess(n, mid).0 > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        }))
    }

    /// Right-hand side of the growth bound satisfied by `f_n(t)`.
    pub fn level_bound(&self, n: usize, t: f64) -> f64 {
        let f_l = self.base.eval(self.log_t);
        let ft = self.base.eval(t);
        let k = n as f64;
        match self.variant {
            Variant::NegativeCase => f_l + k + 1f64.max(ft.max(0.0).powf((2.0f64 / 3.0).powi(n as i32))),
            Variant::PositiveCase => {
                let l5 = self.log_t.powi(5);
                f_l + k * self.kappa_delta * self.log_t
                    + (k - 1.0).max(0.0) * l5
                    + l5.max(ft.max(0.0).powf(0.75f64.powi(n as i32)))
            }
        }
    }
}

pub fn iterate_boundary(ib: &IteratedBoundary, n: usize, t: f64) -> Result<f64> {
    ib.eval(n, t)
}

/// `n(T) = ⌈ln(ln(κT)/ln 2) / ln r⌉` with `r = 3/2` (negative) or `4/3` (positive).
pub fn iteration_count(variant: Variant, kappa: f64, horizon: f64) -> Result<u32> {
    let lk = (kappa * horizon).ln();
    if !(lk >= std::f64::consts::LN_2) {
        return Err(Error::domain(format!(
            "iteration count needs κT >= 2, got κT = {}",
            kappa * horizon
        )));
    }
    let r: f64 = match variant {
        Variant::NegativeCase => 1.5,
        Variant::PositiveCase => 4.0 / 3.0,
    };
    let x = (lk / std::f64::consts::LN_2).ln() / r.ln();
    Ok(x.max(0.0).ceil() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn pow(gamma: f64) -> Boundary {
        Boundary::power(gamma, Sign::Plus, 0.0).unwrap()
    }

    #[test]
    fn json_forms() {
        let b: Boundary =
            serde_json::from_str(r#"{"kind":"power","gamma":0.25,"sign":"minus","offset":1.0}"#)
                .unwrap();
        assert_eq!(b.eval(16.0), -1.0);
        let c: Boundary = serde_json::from_str(r#"{"kind":"constant","value":2.5}"#).unwrap();
        assert_eq!(c.eval(7.0), 2.5);
        let round: Boundary = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        assert_eq!(round.spec(), b.spec());
        let custom = Boundary::custom("id", |t| t, |_| 1.0);
        assert!(serde_json::to_string(&custom).is_err());
        assert!(serde_json::from_str::<Boundary>(r#"{"kind":"power","gamma":-1,"sign":"plus"}"#)
            .is_err());
    }

    #[test]
    fn uchiyama_power_classes() {
        assert!(uchiyama_test(&pow(0.25), 0.0).unwrap().is_finite());
        assert_eq!(uchiyama_test(&pow(0.5), 0.0).unwrap(), IntegralClass::Infinite);
    }

    #[test]
    fn uchiyama_power_value_matches_quadrature() {
        for (g, s, c) in [(0.25, 1.0, 0.0), (0.3, -1.0, 1.0), (0.4, 1.0, -3.0), (0.2, -1.0, -1.0)] {
            let sign = if s > 0.0 { Sign::Plus } else { Sign::Minus };
            let b = Boundary::power(g, sign, c).unwrap();
            let closed = match uchiyama_test(&b, 0.0).unwrap() {
                IntegralClass::Finite(v) => v,
                other => panic!("{other:?}"),
            };
            let bc = b.clone();
            let custom = Boundary::custom("copy", move |t| bc.eval(t), |_| 0.0);
            let numeric = match uchiyama_test(&custom, 1e10).unwrap() {
                IntegralClass::Finite(v) => v,
                other => panic!("{other:?}"),
            };
            assert!((closed - numeric).abs() < 1e-3 * closed.max(1.0), "{g} {s} {c}: {closed} vs {numeric}");
        }
    }

    #[test]
    fn uchiyama_custom_log_corrected_root() {
        let b = Boundary::custom(
            "sqrt(t)/(1+ln t)^2",
            |t: f64| t.sqrt() / (1.0 + t.ln()).powi(2),
            |t: f64| {
                let l = 1.0 + t.ln();
                0.5 / (t.sqrt() * l * l) - 2.0 / (t.sqrt() * l * l * l)
            },
        );
        assert!(uchiyama_test(&b, 1e8).unwrap().is_finite());
    }

    #[test]
    fn uchiyama_custom_divergent() {
        let b = Boundary::custom("t^0.75", |t: f64| t.powf(0.75), |t: f64| 0.75 * t.powf(-0.25));
        assert_eq!(uchiyama_test(&b, 1e8).unwrap(), IntegralClass::Infinite);
        // exponent exactly 1/2 sits on the edge of what a tail fit can resolve
        let edge = Boundary::custom("sqrt", f64::sqrt, |t: f64| 0.5 / t.sqrt());
        assert!(matches!(uchiyama_test(&edge, 1e8).unwrap(), IntegralClass::Inconclusive(_)));
    }

    #[test]
    fn uchiyama_rejects_nan() {
        let b = Boundary::custom("nan", |_| f64::NAN, |_| 0.0);
        assert!(uchiyama_test(&b, 1e4).is_err());
    }

    #[test]
    fn l2_closed_forms() {
        assert_eq!(l2_derivative_test(&pow(0.25), 0.0).unwrap(), IntegralClass::Finite(0.125));
        assert_eq!(l2_derivative_test(&pow(0.5), 0.0).unwrap(), IntegralClass::Infinite);
        assert_eq!(
            l2_derivative_test(&Boundary::constant(3.0), 0.0).unwrap(),
            IntegralClass::Finite(0.0)
        );
    }

    #[test]
    fn l2_custom_matches_closed_form() {
        let b = Boundary::custom("t^0.25", |t: f64| t.powf(0.25), |t: f64| 0.25 * t.powf(-0.75));
        match l2_derivative_test(&b, 1e8).unwrap() {
            IntegralClass::Finite(v) => assert!((v - 0.125).abs() < 1e-6, "{v}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn growth_of_quarter_power() {
        let r = growth_props(&pow(0.25), 1e6).unwrap();
        assert!(r.prop1_holds && r.prop2_holds);
        assert!((r.prop1_c - 1.0).abs() < 1e-12);
        assert!((r.prop2_c - 0.25).abs() < 1e-12);
    }

    #[test]
    fn growth_of_square_fails() {
        let r = growth_props(&pow(2.0), 1e6).unwrap();
        assert!(!r.prop1_holds);
    }

    #[test]
    fn growth_of_constant() {
        let r = growth_props(&Boundary::constant(1.0), 1e6).unwrap();
        assert!(r.prop1_holds && r.prop2_holds);
        assert_eq!(r.prop1_c, 1.0);
        assert_eq!(r.prop2_c, 0.0);
    }

    #[test]
    fn negative_case_level_zero() {
        let ib = IteratedBoundary::new(pow(1.0 / 3.0), E.powf(E), Variant::NegativeCase, 1.0).unwrap();
        let v = iterate_boundary(&ib, 0, 1.0).unwrap();
        assert!((v - E.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((v - 1.3956).abs() < 1e-4);
    }

    #[test]
    fn negative_case_flat_before_anchor() {
        let ib = IteratedBoundary::new(pow(0.4), 1e5, Variant::NegativeCase, 1.0).unwrap();
        let l = 1e5f64.ln();
        for n in 0..8 {
            let at_anchor = ib.eval(n, l).unwrap();
            for t in [0.0, 0.5, 3.0, l * 0.99] {
                assert_eq!(ib.eval(n, t).unwrap(), at_anchor);
            }
        }
    }

    #[test]
    fn positive_case_level_one_before_anchor() {
        let ib = IteratedBoundary::new(pow(1.0 / 3.0), E.powf(E), Variant::PositiveCase, 1.0).unwrap();
        let v = ib.eval(1, 2.0).unwrap();
        let expected = E.powf(1.0 / 3.0) + E + E.powi(5);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 152.527).abs() < 1e-3);
    }

    #[test]
    fn positive_case_matches_literal_recursion() {
        // f_n(t) = f_{n−1}(ln T) + κ ln T + max{(ln T)^5, (f_{n−1}(t) − f_{n−1}(ln T))^{3/4}}
        let base = pow(0.45);
        let t_h: f64 = 1e9;
        let l = t_h.ln();
        let ib = IteratedBoundary::new(base.clone(), t_h, Variant::PositiveCase, 2.0).unwrap();
        for t in [5.0, 1e3, 1e6, 9e8] {
            let mut prev = base.eval(l).max(base.eval(t));
            let mut prev_l = base.eval(l);
            for n in 1..6 {
                let cur = prev_l + 2.0 * l + l.powi(5).max((prev - prev_l).max(0.0).powf(0.75));
                let cur_l = prev_l + 2.0 * l + l.powi(5);
                let got = ib.eval(n, t).unwrap();
                assert!((got - cur).abs() <= 1e-9 * cur, "n={n} t={t}: {got} vs {cur}");
                prev = cur;
                prev_l = cur_l;
            }
        }
    }

    #[test]
    fn negative_case_matches_literal_recursion() {
        let base = pow(0.45);
        let t_h: f64 = 1e9;
        let l = t_h.ln();
        let ib = IteratedBoundary::new(base.clone(), t_h, Variant::NegativeCase, 1.0).unwrap();
        for t in [5.0, 1e3, 1e6, 9e8] {
            let mut prev = base.eval(l).max(base.eval(t));
            let mut prev_l = base.eval(l);
            for n in 1..8 {
                let cur = 1f64.max((prev - prev_l).powf(2.0 / 3.0)) + prev_l;
                let cur_l = 1.0 + prev_l;
                let got = ib.eval(n, t).unwrap();
                assert!((got - cur).abs() <= 1e-12 * cur, "n={n} t={t}: {got} vs {cur}");
                prev = cur;
                prev_l = cur_l;
            }
        }
    }

    #[test]
    fn level_cap_and_base_requirement() {
        let ib = IteratedBoundary::new(pow(0.3), 100.0, Variant::NegativeCase, 1.0).unwrap();
        assert!(ib.eval(MAX_LEVEL + 1, 1.0).is_err());
        assert!(IteratedBoundary::new(Boundary::constant(1.0), 100.0, Variant::NegativeCase, 1.0)
            .is_err());
        assert!(IteratedBoundary::new(pow(0.3), 2.0, Variant::NegativeCase, 1.0).is_err());
    }

    #[test]
    fn switch_point_brackets_plateau() {
        let ib = IteratedBoundary::new(pow(0.45), 1e12, Variant::NegativeCase, 1.0).unwrap();
        for n in 1..4 {
            let s = ib.switch_point(n).unwrap().expect("leaves plateau");
            let a = ib.anchor(n);
            assert_eq!(ib.eval(n, s * (1.0 - 1e-6)).unwrap(), a);
            assert!(ib.eval(n, s * (1.0 + 1e-6)).unwrap() > a);
        }
    }

    #[test]
    fn iteration_counts() {
        assert_eq!(iteration_count(Variant::NegativeCase, 1.0, 65536.0).unwrap(), 7);
        assert_eq!(iteration_count(Variant::PositiveCase, 1.0, 65536.0).unwrap(), 10);
        assert_eq!(iteration_count(Variant::NegativeCase, 1.0, 2.0).unwrap(), 0);
        assert!(iteration_count(Variant::NegativeCase, 1.0, 1.5).is_err());
    }

    fn derivative_consistent(b: &Boundary, t: f64) -> bool {
        let h = 1e-4 * t;
        let fd = (b.eval(t + h) - b.eval(t - h)) / (2.0 * h);
        let d = b.deriv(t);
        (fd - d).abs() <= 1e-4 * (1.0 + d.abs())
    }

    fn variant_strategy() -> impl Strategy<Value = Variant> {
        prop_oneof![Just(Variant::NegativeCase), Just(Variant::PositiveCase)]
    }

    proptest! {
        #[test]
        fn power_derivative_consistent(gamma in 0.0f64..2.0, offset in -5.0f64..5.0,
                                       minus in any::<bool>(), t in 1.0f64..1e4) {
            let sign = if minus { Sign::Minus } else { Sign::Plus };
            let b = Boundary::power(gamma, sign, offset).unwrap();
            prop_assert!(derivative_consistent(&b, t));
        }

        #[test]
        fn uchiyama_agrees_with_l2(gamma in 0.0f64..1.0) {
            let b = pow(gamma);
            let u = uchiyama_test(&b, 0.0).unwrap().is_finite();
            let l = l2_derivative_test(&b, 0.0).unwrap().is_finite();
            prop_assert_eq!(u, l);
            prop_assert_eq!(u, gamma < 0.5);
        }

        #[test]
        fn level_derivative_dominated(variant in variant_strategy(), n in 0usize..=10,
                                      gamma in 0.05f64..0.49, u in 0.0f64..1.0) {
            let t_h: f64 = 1e8;
            let ib = IteratedBoundary::new(pow(gamma), t_h, variant, 1.0).unwrap();
            let l = t_h.ln();
            let t = l + (t_h - l) * u;
            let d = ib.deriv(n, t).unwrap();
            prop_assert!(d <= ib.base().deriv(t) + 1e-9);
            // chain-rule derivative against a central difference
            let h = 1e-6 * t;
            let fd = (ib.eval(n, t + h).unwrap() - ib.eval(n, t - h).unwrap()) / (2.0 * h);
            if (ib.eval(n, t + h).unwrap() > ib.anchor(n)) == (ib.eval(n, t - h).unwrap() > ib.anchor(n)) {
                prop_assert!((fd - d).abs() <= 1e-4 * (1.0 + d.abs()) + 1e-9, "fd {} d {}", fd, d);
                prop_assert!(fd <= ib.base().deriv(t) + 1e-6);
            }
        }

        #[test]
        fn negative_case_growth_bound(n in 0usize..=20, gamma in 0.05f64..1.5, u in 0.0f64..1.0) {
            let t_h = 1e6;
            let ib = IteratedBoundary::new(pow(gamma), t_h, Variant::NegativeCase, 1.0).unwrap();
            let t = t_h * u;
            prop_assert!(ib.eval(n, t).unwrap() <= ib.level_bound(n, t) + 1e-9);
        }

        #[test]
        fn positive_case_growth_bound(n in 0usize..=20, gamma in 0.05f64..1.5, u in 0.0f64..1.0,
                                      kappa in 0.0f64..3.0) {
            let t_h = 1e6;
            let ib = IteratedBoundary::new(pow(gamma), t_h, Variant::PositiveCase, kappa).unwrap();
            let t = t_h * u;
            let v = ib.eval(n, t).unwrap();
            prop_assert!(v <= ib.level_bound(n, t) * (1.0 + 1e-12) + 1e-9);
        }

        #[test]
        fn levels_monotone(variant in variant_strategy(), n in 0usize..=10,
                           a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let ib = IteratedBoundary::new(pow(0.4), 1e6, variant, 1.0).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(ib.eval(n, lo).unwrap() <= ib.eval(n, hi).unwrap());
        }
    }
}
