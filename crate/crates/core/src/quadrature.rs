//! Adaptive Simpson quadrature and a convergence classifier for integrals over `[1, ∞)`.

use serde::{Deserialize, Serialize};

/// Outcome of an improper-integral test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "class", content = "value")]
pub enum IntegralClass {
    Finite(f64),
    Infinite,
    /// The integral up to the quadrature cap, with no detectable tail behaviour.
    Inconclusive(f64),
}

impl IntegralClass {
    pub fn is_finite(&self) -> bool {
        matches!(self, IntegralClass::Finite(_))
    }
}

pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return f64::NAN;
    }
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const REL_STOP: f64 = 1e-6;
const MIN_DOUBLINGS: u32 = 8;

/// Classifies `∫_1^∞ g(t) dt` for a nonnegative integrand.
///
/// Integrates over `[1, 2], [2, 4], …` until a doubling adds less than `1e-6`
/// of the running total, never past `quad_upper`. If the cap is hit, a power
/// law `g(t) ≈ C t^p` is fitted on the last two decades below the cap.
/// Returns `None` when `g` produces a non-finite value.
pub fn classify_tail<F: Fn(f64) -> f64>(g: F, quad_upper: f64) -> Option<IntegralClass> {
    let upper = quad_upper.max(1e3);
    let mut total: f64 = 0.0;
    let mut lo: f64 = 1.0;
    let mut doublings = 0;
    loop {
        let hi = (2.0 * lo).min(upper);
        let inc = adaptive_simpson(&g, lo, hi, 1e-12 * (1.0 + total.abs()));
        if !inc.is_finite() {
            return None;
        }
        total += inc;
        doublings += 1;
        if doublings >= MIN_DOUBLINGS && inc.abs() <= REL_STOP * total.abs() {
            return Some(IntegralClass::Finite(total));
        }
        if hi >= upper {
            break;
        }
        lo = hi;
    }

    let n = 41;
    let (a, b) = ((upper / 100.0).ln(), upper.ln());
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let lt = a + (b - a) * i as f64 / (n - 1) as f64;
        let v = g(lt.exp()).abs();
        if !v.is_finite() {
            return None;
        }
        if v > 0.0 {
            pts.push((lt, v.ln()));
        }
    }
    if pts.len() < n / 2 {
        return Some(IntegralClass::Finite(total));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    if slope < -1.01 {
        let tail = g(upper).abs() * upper / (-1.0 - slope);
        Some(IntegralClass::Finite(total + tail))
    } else if slope > -0.99 {
        Some(IntegralClass::Infinite)
    } else {
        Some(IntegralClass::Inconclusive(total))
    }
}
