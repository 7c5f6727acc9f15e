//! Lévy laws given by their generating triplet `(σ², b, ν)`.
//!
//! The characteristic exponent uses the truncation `1_{|x| ≤ 1}`:
//!
//! ```text
//! Ψ(u) = i b u − σ² u² / 2 + ∫ (e^{iux} − 1 − 1_{|x|≤1} iux) ν(dx)
//! ```
//!
//! The jump measure is restricted to finitely many atoms, at most one stable
//! component and a piecewise-constant density. The stable component is the
//! strictly stable law in the `S_α(scale, skew, 0)` parametrization and
//! carries its own centering; it never contributes to the truncated
//! compensator of the other parts.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point mass of the jump measure: jumps of size `location` at `rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Atom {
    pub location: f64,
    pub rate: f64,
}

impl From<(f64, f64)> for Atom {
    fn from((location, rate): (f64, f64)) -> Self {
        Atom { location, rate }
    }
}

impl From<Atom> for (f64, f64) {
    fn from(a: Atom) -> Self {
        (a.location, a.rate)
    }
}

/// Stable jump component, `S_α(scale, skew, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StablePart {
    pub alpha: f64,
    pub scale: f64,
    pub skew: f64,
}

/// One cell `[lo, hi]` of a piecewise-constant jump density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBin {
    pub lo: f64,
    pub hi: f64,
    pub height: f64,
}

impl DensityBin {
    pub fn mass(&self) -> f64 {
        self.height * (self.hi - self.lo)
    }

    /// ∫ x^k over the intersection of the bin with `[a, b]`, times the height.
    pub(crate) fn moment_on(&self, k: i32, a: f64, b: f64) -> f64 {
        let lo = self.lo.max(a);
        let hi = self.hi.min(b);
        if hi <= lo {
            return 0.0;
        }
        let p = (k + 1) as f64;
        self.height * (hi.powi(k + 1) - lo.powi(k + 1)) / p
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JumpMeasure {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub stable: Option<StablePart>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub density: Vec<DensityBin>,
}

impl JumpMeasure {
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.stable.is_none() && self.density.is_empty()
    }

    /// ν((−∞, 0)). Infinite when a stable component charges the negative axis.
    pub fn mass_negative(&self) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location < 0.0)
            .map(|a| a.rate)
            .sum();
        let dens: f64 = self
            .density
            .iter()
            .filter(|b| b.hi <= 0.0)
            .map(DensityBin::mass)
            .sum();
        match self.stable {
            Some(s) if s.skew < 1.0 => f64::INFINITY,
            _ => atoms + dens,
        }
    }

    /// ν((0, ∞)).
    pub fn mass_positive(&self) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location > 0.0)
            .map(|a| a.rate)
            .sum();
        let dens: f64 = self
            .density
            .iter()
            .filter(|b| b.lo >= 0.0)
            .map(DensityBin::mass)
            .sum();
        match self.stable {
            Some(s) if s.skew > -1.0 => f64::INFINITY,
            _ => atoms + dens,
        }
    }

    /// Whether ∫ (|x| ∧ x²) ν(dx) < ∞.
    pub fn has_first_moment(&self) -> bool {
        self.stable.is_none_or(|s| s.alpha > 1.0)
    }

    /// ∫_{[a,b]} x² ν(dx) over the finite-activity parts.
    pub fn second_moment_on(&self, a: f64, b: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|at| at.location >= a && at.location <= b)
            .map(|at| at.location * at.location * at.rate)
            .sum();
        let dens: f64 = self.density.iter().map(|bin| bin.moment_on(2, a, b)).sum();
        atoms + dens
    }

    /// ∫_{|x| ≤ 1} x ν(dx) over atoms and density.
    fn truncated_mean(&self) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location.abs() <= 1.0)
            .map(|a| a.location * a.rate)
            .sum();
        let dens: f64 = self.density.iter().map(|b| b.moment_on(1, -1.0, 1.0)).sum();
        atoms + dens
    }

    /// ∫_{|x| > 1} x ν(dx) over atoms and density.
    fn tail_mean(&self) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location.abs() > 1.0)
            .map(|a| a.location * a.rate)
            .sum();
        let dens: f64 = self
            .density
            .iter()
            .map(|b| b.moment_on(1, f64::NEG_INFINITY, -1.0) + b.moment_on(1, 1.0, f64::INFINITY))
            .sum();
        atoms + dens
    }
}

/// The generating triplet of a Lévy process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyTriplet {
    pub sigma2: f64,
    pub drift: f64,
    #[serde(flatten)]
    pub jumps: JumpMeasure,
    #[serde(skip)]
    explicit_zero: bool,
}

impl LevyTriplet {
    pub fn new(sigma2: f64, drift: f64, jumps: JumpMeasure) -> Self {
        LevyTriplet {
            sigma2,
            drift,
            jumps,
            explicit_zero: false,
        }
    }

    /// The process `X ≡ 0`.
    pub fn zero() -> Self {
        LevyTriplet {
            explicit_zero: true,
            ..LevyTriplet::new(0.0, 0.0, JumpMeasure::default())
        }
    }

    /// Brownian motion with variance `sigma2` per unit time.
    pub fn brownian(sigma2: f64) -> Self {
        LevyTriplet::new(sigma2, 0.0, JumpMeasure::default())
    }

    pub fn with_drift(mut self, drift: f64) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_atom(mut self, location: f64, rate: f64) -> Self {
        self.jumps.atoms.push(Atom { location, rate });
        self
    }

    pub fn with_stable(mut self, alpha: f64, scale: f64, skew: f64) -> Self {
        self.jumps.stable = Some(StablePart { alpha, scale, skew });
        self
    }

    pub fn with_density_bin(mut self, lo: f64, hi: f64, height: f64) -> Self {
        self.jumps.density.push(DensityBin { lo, hi, height });
        self
    }

    pub fn is_zero_process(&self) -> bool {
        self.sigma2 == 0.0 && self.drift == 0.0 && self.jumps.is_empty()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_triplet(self)
    }

    /// Drift of the path decomposition `X(t) = raw_drift·t + σB(t) + Σ jumps`
    /// over the finite-activity parts, i.e. `b − ∫_{|x|≤1} x ν(dx)`.
    pub fn raw_drift(&self) -> f64 {
        self.drift - self.jumps.truncated_mean()
    }

    /// `E X(1)`, when it exists.
    pub fn mean(&self) -> Result<f64> {
        if !self.jumps.has_first_moment() {
            return Err(Error::FirstMomentAbsent);
        }
        // S_α(σ, β, 0) with α > 1 is centred.
        Ok(self.drift + self.jumps.tail_mean())
    }

    /// `E X(1)²` minus the squared mean; infinite with a stable component.
    pub fn variance(&self) -> f64 {
        if self.jumps.stable.is_some() {
            return f64::INFINITY;
        }
        self.sigma2 + self.jumps.second_moment_on(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Componentwise sum, i.e. the law of `X + X'` for independent `X`, `X'`.
    pub fn add(&self, other: &LevyTriplet) -> Result<LevyTriplet> {
        let stable = match (self.jumps.stable, other.jumps.stable) {
            (None, s) | (s, None) => s,
            (Some(a), Some(b)) => {
                if a.alpha != b.alpha {
                    return Err(Error::arg("stable components with different indices do not add"));
                }
                if a.alpha == 1.0 && (a.skew != 0.0 || b.skew != 0.0) {
                    return Err(Error::arg("skewed Cauchy components do not add in closed form"));
                }
                let wa = a.scale.powf(a.alpha);
                let wb = b.scale.powf(b.alpha);
                Some(StablePart {
                    alpha: a.alpha,
                    scale: (wa + wb).powf(1.0 / a.alpha),
                    skew: (a.skew * wa + b.skew * wb) / (wa + wb),
                })
            }
        };
        let mut atoms = self.jumps.atoms.clone();
        atoms.extend_from_slice(&other.jumps.atoms);
        let mut density = self.jumps.density.clone();
        density.extend_from_slice(&other.jumps.density);
        let mut sum = LevyTriplet::new(
            self.sigma2 + other.sigma2,
            self.drift + other.drift,
            JumpMeasure {
                atoms,
                stable,
                density,
            },
        );
        sum.explicit_zero = self.explicit_zero && other.explicit_zero;
        Ok(sum)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut t: LevyTriplet = serde_json::from_str(s)?;
        t.explicit_zero = t.is_zero_process();
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Sigma2Negative,
    NonFinite(&'static str),
    AtomAtOrigin { index: usize },
    AtomRateNonPositive { index: usize },
    StableAlpha(f64),
    StableScale(f64),
    StableSkew(f64),
    DensityBin { index: usize, reason: &'static str },
    Degenerate,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Sigma2Negative => write!(f, "sigma2 negative"),
            Violation::NonFinite(what) => write!(f, "{what} not finite"),
            Violation::AtomAtOrigin { index } => write!(f, "atom at origin (atom {index})"),
            Violation::AtomRateNonPositive { index } => {
                write!(f, "atom rate not positive (atom {index})")
            }
            Violation::StableAlpha(a) => write!(f, "stable alpha {a} outside (0, 2)"),
            Violation::StableScale(s) => write!(f, "stable scale {s} not positive"),
            Violation::StableSkew(b) => write!(f, "stable skew {b} outside [-1, 1]"),
            Violation::DensityBin { index, reason } => write!(f, "density bin {index}: {reason}"),
            Violation::Degenerate => write!(f, "degenerate process (no diffusion, drift or jumps)"),
        }
    }
}

/// Every violated admissibility condition of a triplet; empty iff admissible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.to_string().contains(needle))
    }

    pub(crate) fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidTriplet(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_triplet(t: &LevyTriplet) -> ValidationReport {
    let mut v = Vec::new();
    if !t.sigma2.is_finite() {
        v.push(Violation::NonFinite("sigma2"));
    } else if t.sigma2 < 0.0 {
        v.push(Violation::Sigma2Negative);
    }
    if !t.drift.is_finite() {
        v.push(Violation::NonFinite("drift"));
    }
    for (index, a) in t.jumps.atoms.iter().enumerate() {
        if !a.location.is_finite() || !a.rate.is_finite() {
            v.push(Violation::NonFinite("atom"));
            continue;
        }
        if a.location == 0.0 {
            v.push(Violation::AtomAtOrigin { index });
        }
        if a.rate <= 0.0 {
            v.push(Violation::AtomRateNonPositive { index });
        }
    }
    if let Some(s) = t.jumps.stable {
        if !(s.alpha > 0.0 && s.alpha < 2.0) {
            v.push(Violation::StableAlpha(s.alpha));
        }
        if !(s.scale > 0.0 && s.scale.is_finite()) {
            v.push(Violation::StableScale(s.scale));
        }
        if !(-1.0..=1.0).contains(&s.skew) {
            v.push(Violation::StableSkew(s.skew));
        }
    }
    for (index, b) in t.jumps.density.iter().enumerate() {
        let reason = if !(b.lo.is_finite() && b.hi.is_finite() && b.height.is_finite()) {
            Some("not finite")
        } else if b.hi <= b.lo {
            Some("empty interval")
        } else if b.lo < 0.0 && b.hi > 0.0 {
            Some("straddles the origin")
        } else if b.height < 0.0 {
            Some("negative height")
        } else {
            None
        };
        if let Some(reason) = reason {
            v.push(Violation::DensityBin { index, reason });
        }
    }
    if t.is_zero_process() && !t.explicit_zero {
        v.push(Violation::Degenerate);
    }
    ValidationReport { violations: v }
}

/// Ψ(u) of the triplet.
pub fn char_exponent(t: &LevyTriplet, u: f64) -> Result<Complex64> {
    validate_triplet(t).into_result()?;
    if u == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut psi = Complex64::new(-0.5 * t.sigma2 * u * u, t.drift * u);
    for a in &t.jumps.atoms {
        let x = a.location;
        let comp = if x.abs() <= 1.0 { u * x } else { 0.0 };
        let (s, c) = (u * x).sin_cos();
        psi += a.rate * Complex64::new(c - 1.0, s - comp);
    }
    for b in &t.jumps.density {
        psi += density_bin_exponent(b, u);
    }
    if let Some(s) = t.jumps.stable {
        psi += stable_exponent(s, u);
    }
    Ok(psi)
}

/// ∫_bin (e^{iux} − 1 − 1_{|x|≤1} iux) h dx in closed form.
fn density_bin_exponent(b: &DensityBin, u: f64) -> Complex64 {
    // (e^{iu hi} − e^{iu lo}) / (iu) via half-angle products, which avoids
    // cancellation for small |u|
    let mid = 0.5 * (b.hi + b.lo);
    let width = b.hi - b.lo;
    let half = (0.5 * u * width).sin();
    let (s_mid, c_mid) = (u * mid).sin_cos();
    let osc = Complex64::new(2.0 * c_mid * half, 2.0 * s_mid * half) / u;
    b.height * (osc - width) - Complex64::new(0.0, u * b.moment_on(1, -1.0, 1.0))
}

fn stable_exponent(s: StablePart, u: f64) -> Complex64 {
    let au = u.abs();
    let sign = u.signum();
    if s.alpha == 1.0 {
        let re = -s.scale * au;
        let im = -s.scale * au * s.skew * (2.0 / PI) * sign * au.ln();
        Complex64::new(re, im)
    } else {
        let w = (s.scale * au).powf(s.alpha);
        let tan = (PI * s.alpha / 2.0).tan();
        Complex64::new(-w, w * s.skew * sign * tan)
    }
}

/// The same law recentred so that `E X(1) = 0`; diffusion and jumps unchanged.
pub fn martingale_normalize(t: &LevyTriplet) -> Result<LevyTriplet> {
    validate_triplet(t).into_result()?;
    let mean = t.mean()?;
    let mut out = t.clone();
    out.drift -= mean;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn brownian_motion_is_admissible() {
        assert!(validate_triplet(&LevyTriplet::brownian(1.0)).is_empty());
    }

    #[test]
    fn negative_sigma2_is_reported() {
        let r = validate_triplet(&LevyTriplet::brownian(-1.0));
        assert!(r.contains("sigma2 negative"), "{r}");
    }

    #[test]
    fn atom_at_origin_is_reported() {
        let t = LevyTriplet::brownian(0.0).with_atom(0.0, 1.0);
        let r = validate_triplet(&t);
        assert!(r.contains("atom at origin"), "{r}");
    }

    #[test]
    fn degenerate_unless_explicit_zero() {
        assert!(validate_triplet(&LevyTriplet::zero()).is_empty());
        let r = validate_triplet(&LevyTriplet::brownian(0.0));
        assert!(r.contains("degenerate"));
    }

    #[test]
    fn report_lists_every_violation() {
        let t = LevyTriplet::brownian(-2.0)
            .with_atom(0.0, -1.0)
            .with_stable(2.5, 0.0, 3.0)
            .with_density_bin(-0.5, 0.5, 1.0);
        let r = validate_triplet(&t);
        assert_eq!(r.violations.len(), 7, "{r}");
    }

    #[test]
    fn gaussian_exponent() {
        let psi = char_exponent(&LevyTriplet::brownian(1.0), 1.0).unwrap();
        assert!(close(psi, Complex64::new(-0.5, 0.0), 1e-15));
    }

    #[test]
    fn exponent_vanishes_at_zero() {
        let t = LevyTriplet::brownian(2.0)
            .with_drift(0.3)
            .with_atom(-0.4, 1.5)
            .with_stable(1.3, 0.7, 0.2);
        assert_eq!(char_exponent(&t, 0.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn single_atom_exponent() {
        let t = LevyTriplet::brownian(0.0).with_atom(1.0, 1.0);
        let psi = char_exponent(&t, PI).unwrap();
        assert!(close(psi, Complex64::new(-2.0, -PI), 1e-14), "{psi}");
    }

    #[test]
    fn non_validated_triplet_is_rejected() {
        assert!(char_exponent(&LevyTriplet::brownian(-1.0), 1.0).is_err());
    }

    #[test]
    fn density_bin_matches_quadrature() {
        let bin = DensityBin {
            lo: 0.5,
            hi: 1.7,
            height: 0.8,
        };
        let t = LevyTriplet::brownian(0.0).with_density_bin(bin.lo, bin.hi, bin.height);
        let u = 1.3;
        // midpoint rule; x = 1 falls on a cell edge
        let n = 120_000;
        let h = (bin.hi - bin.lo) / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let x = bin.lo + (i as f64 + 0.5) * h;
            let comp = if x <= 1.0 { u * x } else { 0.0 };
            acc += Complex64::new((u * x).cos() - 1.0, (u * x).sin() - comp) * h * bin.height;
        }
        let psi = char_exponent(&t, u).unwrap();
        assert!(close(psi, acc, 1e-6), "{psi} vs {acc}");
    }

    #[test]
    fn normalize_removes_gaussian_drift() {
        let t = LevyTriplet::brownian(1.0).with_drift(3.0);
        let m = martingale_normalize(&t).unwrap();
        assert_eq!(m.sigma2, 1.0);
        assert_eq!(m.drift, 0.0);
        assert!(m.jumps.is_empty());
    }

    #[test]
    fn normalize_compensates_atom_inside_truncation() {
        // The atom at x = 1 is already compensated by the truncation term, so
        // the triplet drift stays 0 while the path drift becomes −λx = −2.
        let t = LevyTriplet::brownian(0.0).with_atom(1.0, 2.0);
        let m = martingale_normalize(&t).unwrap();
        assert_eq!(m.mean().unwrap(), 0.0);
        assert_eq!(m.raw_drift(), -2.0);
        assert_eq!(m.drift, 0.0);
    }

    #[test]
    fn normalize_compensates_atom_outside_truncation() {
        let t = LevyTriplet::brownian(0.0).with_atom(-3.0, 0.5);
        let m = martingale_normalize(&t).unwrap();
        assert_eq!(m.drift, 1.5);
        assert_eq!(m.raw_drift(), 1.5);
    }

    #[test]
    fn normalize_rejects_heavy_stable() {
        let t = LevyTriplet::brownian(0.0).with_stable(0.8, 1.0, 0.0);
        assert!(matches!(
            martingale_normalize(&t),
            Err(Error::FirstMomentAbsent)
        ));
    }

    #[test]
    fn one_sided_masses() {
        let t = LevyTriplet::brownian(0.0)
            .with_atom(-0.5, 1.0)
            .with_density_bin(0.2, 0.4, 5.0);
        assert_eq!(t.jumps.mass_negative(), 1.0);
        assert!((t.jumps.mass_positive() - 1.0).abs() < 1e-12);
        let s = LevyTriplet::brownian(0.0).with_stable(1.5, 1.0, -1.0);
        assert_eq!(s.jumps.mass_positive(), 0.0);
        assert!(s.jumps.mass_negative().is_infinite());
    }

    #[test]
    fn json_shape() {
        let t = LevyTriplet::brownian(1.0)
            .with_atom(-0.5, 1.0)
            .with_stable(1.5, 1.0, -1.0);
        let s = t.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["atoms"][0][0], -0.5);
        assert_eq!(v["stable"]["alpha"], 1.5);
        assert!(v.get("density").is_none());
        let back = LevyTriplet::from_json(&s).unwrap();
        assert_eq!(back, t);
        let null_stable = LevyTriplet::from_json(
            r#"{"sigma2":1.0,"drift":0.0,"atoms":[],"stable":null}"#,
        )
        .unwrap();
        assert!(null_stable.jumps.stable.is_none());
    }
}
