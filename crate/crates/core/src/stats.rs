//! Exact, order-independent accumulation of path outcomes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

const SCALE: f64 = (1u64 << 52) as f64;

/// Running sums of outcomes in `[0, 1]`, held in fixed point.
///
/// Each outcome is rounded to a multiple of `2^-52`, so sums are integers and
/// merging tallies in any order gives bit-identical results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    n: u64,
    sum: u128,
    sum_sq: u128,
}

impl Tally {
    pub fn push(mut self, w: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&w), "outcome {w} outside [0, 1]");
        let q = (w.clamp(0.0, 1.0) * SCALE).round() as u128;
        self.n += 1;
        self.sum += q;
        self.sum_sq += q * q;
        self
    }

    pub fn merge(self, other: Tally) -> Self {
        Tally {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.sum as f64 / SCALE / self.n as f64
    }

    /// Unbiased sample variance of the outcomes.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let s = self.sum as f64 / SCALE;
        let s2 = self.sum_sq as f64 / (SCALE * SCALE);
        ((s2 - s * s / n) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    pub fn wilson(&self) -> (f64, f64) {
        wilson(self.mean(), self.n)
    }
}

/// 95% Wilson score interval for a proportion `p` from `n` trials.
pub fn wilson(p: f64, n: u64) -> (f64, f64) {
    let n = n as f64;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).max(0.0).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Tallies `outcome(i, scratch)` for `i in 0..n` in parallel.
pub(crate) fn par_tally<S, I, F>(n: u64, init: I, outcome: F) -> Tally
where
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(u64, &mut S) -> f64 + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map_init(&init, |s, i| outcome(i, s))
        .fold(Tally::default, Tally::push)
        .reduce(Tally::default, Tally::merge)
}

/// A point estimate with its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_error: f64,
    pub n_paths: u64,
}

impl Estimate {
    pub fn from_tally(t: &Tally) -> Self {
        let (ci_low, ci_high) = t.wilson();
        Estimate {
            p_hat: t.mean(),
            ci_low,
            ci_high,
            std_error: t.std_error(),
            n_paths: t.count(),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}
