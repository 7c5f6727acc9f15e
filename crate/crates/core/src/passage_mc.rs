//! Non-exit probabilities, survival curves and exponent fits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary::Boundary;
use crate::error::{Error, Result};
use crate::levy_model::LevyTriplet;
use crate::rng::RngStamp;
use crate::simulate::{drive, Grid, NoExtra, PathModel, SimConfig, Survival};
use crate::stats::{par_tally, Estimate, Tally};

pub const MIN_PATHS: u64 = 100;

/// `P(X(t) ≤ f(t), 0 ≤ t ≤ T)` by crude Monte Carlo over paths `0..n_paths`
/// of stream batch 0.
pub fn estimate_survival(
    t: &LevyTriplet,
    b: &Boundary,
    horizon: f64,
    n_paths: u64,
    cfg: &SimConfig,
    seed: u64,
) -> Result<Estimate> {
    let model = PathModel::new(t, cfg)?;
    let tally = survival_tally(&model, b, horizon, 0..n_paths, cfg, seed, 0)?;
    Ok(Estimate::from_tally(&tally))
}

/// Tally over the given path indices of one stream batch. Disjoint index
/// ranges give tallies that merge exactly into the pooled one.
pub fn survival_tally(
    model: &PathModel,
    b: &Boundary,
    horizon: f64,
    paths: std::ops::Range<u64>,
    cfg: &SimConfig,
    seed: u64,
    batch: u64,
) -> Result<Tally> {
    let n = paths.end.saturating_sub(paths.start);
    if n < MIN_PATHS {
        return Err(Error::arg(format!("need at least {MIN_PATHS} paths, got {n}")));
    }
    let grid = Grid::new(horizon, cfg.dt_max)?;
    let grid_values = grid.boundary_values(b);
    let bridge = model.bridge_variance(cfg);
    Ok(par_tally(n, Vec::new, |i, buf| {
        let stamp = RngStamp::for_path(seed, batch, paths.start + i);
        let mut s = Survival::new(b, &grid_values, bridge);
        drive(model, &grid, stamp, &mut NoExtra, &mut s, buf);
        s.outcome()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub horizons: Vec<f64>,
    pub estimates: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub n_paths: Vec<u64>,
}

impl SurvivalCurve {
    pub fn len(&self) -> usize {
        self.horizons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.horizons.is_empty()
    }

    pub fn push(&mut self, horizon: f64, e: &Estimate) {
        self.horizons.push(horizon);
        self.estimates.push(e.p_hat);
        self.ci_low.push(e.ci_low);
        self.ci_high.push(e.ci_high);
        self.n_paths.push(e.n_paths);
    }

    /// Curve of exact probabilities, as if estimated from `n` paths each.
    pub fn from_values(horizons: &[f64], p: &[f64], n: u64) -> Self {
        let mut c = SurvivalCurve::default();
        for (&t, &p) in horizons.iter().zip(p) {
            let (lo, hi) = crate::stats::wilson(p, n);
            c.horizons.push(t);
            c.estimates.push(p);
            c.ci_low.push(lo);
            c.ci_high.push(hi);
            c.n_paths.push(n);
        }
        c
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["T", "p", "ci_low", "ci_high", "n"])?;
        for i in 0..self.len() {
            w.write_record([
                self.horizons[i].to_string(),
                self.estimates[i].to_string(),
                self.ci_low[i].to_string(),
                self.ci_high[i].to_string(),
                self.n_paths[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut c = SurvivalCurve::default();
        for row in r.deserialize() {
            let (t, p, lo, hi, n): (f64, f64, f64, f64, u64) = row?;
            c.horizons.push(t);
            c.estimates.push(p);
            c.ci_low.push(lo);
            c.ci_high.push(hi);
            c.n_paths.push(n);
        }
        Ok(c)
    }
}

impl Default for SurvivalCurve {
    fn default() -> Self {
        SurvivalCurve {
            horizons: Vec::new(),
            estimates: Vec::new(),
            ci_low: Vec::new(),
            ci_high: Vec::new(),
            n_paths: Vec::new(),
        }
    }
}

/// Geometric grid from `t_min` with `points_per_decade` points per factor 10,
/// ending at `t_max`.
pub fn geometric_horizons(t_min: f64, t_max: f64, points_per_decade: f64) -> Result<Vec<f64>> {
    if !(t_min >= 1.0) || !(t_max / t_min >= 16.0) || !t_max.is_finite() {
        return Err(Error::arg(format!(
            "horizon grid needs T_min >= 1 and T_max/T_min >= 16, got [{t_min}, {t_max}]"
        )));
    }
    if !(points_per_decade > 0.0) {
        return Err(Error::arg("points_per_decade must be positive"));
    }
    let step = std::f64::consts::LN_10 / points_per_decade;
    let span = (t_max / t_min).ln();
    let m = (span / step + 1e-9).floor() as usize;
    let mut hs: Vec<f64> = (0..=m).map(|j| t_min * (j as f64 * step).exp()).collect();
    let last = hs.last_mut().expect("grid has a point");
    if (*last - t_max).abs() <= 1e-6 * t_max {
        *last = t_max;
    } else {
        hs.push(t_max);
    }
    Ok(hs)
}

/// Survival estimates on a geometric grid. Each horizon uses its own stream
/// batch, so estimates at different horizons are independent.
#[allow(clippy::too_many_arguments)]
pub fn survival_curve(
    t: &LevyTriplet,
    b: &Boundary,
    t_min: f64,
    t_max: f64,
    points_per_decade: f64,
    n_paths: u64,
    cfg: &SimConfig,
    seed: u64,
) -> Result<SurvivalCurve> {
    let model = PathModel::new(t, cfg)?;
    let mut curve = SurvivalCurve::default();
    for (j, &h) in geometric_horizons(t_min, t_max, points_per_decade)?.iter().enumerate() {
        let tally = survival_tally(&model, b, h, 0..n_paths, cfg, seed, j as u64)?;
        curve.push(h, &Estimate::from_tally(&tally));
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub delta_hat: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub intercept: f64,
    pub points: usize,
}

/// Fit over the default window, which drops horizons below `10·T_1`.
pub fn fit_exponent(c: &SurvivalCurve) -> Result<ExponentFit> {
    let t1 = *c.horizons.first().ok_or_else(|| Error::arg("empty curve"))?;
    let in_window = c.horizons.iter().filter(|&&h| h >= 10.0 * t1 * (1.0 - 1e-12)).count();
    if in_window >= 4 {
        fit_exponent_window(c, 10.0 * t1 * (1.0 - 1e-12), f64::INFINITY)
    } else {
        fit_exponent_window(c, t1, f64::INFINITY)
    }
}

/// Weighted least squares of `ln p̂` on `ln T` over horizons in `[lo, hi]`.
///
/// Weights are inverse delta-method variances `(1 − p)/(n p)`, floored at
/// `1/(4n²)` so that `p̂ = 1` keeps a finite weight. The slope standard error
/// is inflated by the reduced chi-square when the scatter exceeds the weights.
pub fn fit_exponent_window(c: &SurvivalCurve, lo: f64, hi: f64) -> Result<ExponentFit> {
    let mut pts = Vec::new();
    for i in 0..c.len() {
        let h = c.horizons[i];
        if h < lo || h > hi {
            continue;
        }
        let p = c.estimates[i];
        if !(p > 0.0) {
            return Err(Error::ZeroSurvival { horizon: h });
        }
        let n = c.n_paths[i].max(1) as f64;
        let var = ((1.0 - p) / (n * p)).max(0.25 / (n * n));
        pts.push((h.ln(), p.ln(), 1.0 / var));
    }
    if pts.len() < 4 {
        return Err(Error::arg(format!(
            "exponent fit needs at least 4 horizons in the window, got {}",
            pts.len()
        )));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2: f64 = pts
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let red = chi2 / (pts.len() - 2) as f64;
    let first = pts.first().expect("nonempty").0.exp();
    let last = pts.last().expect("nonempty").0.exp();
    Ok(ExponentFit {
        delta_hat: if slope < 0.0 { -slope } else { 0.0 },
        stderr: (red.max(1.0) / sxx).sqrt(),
        window: (first, last),
        intercept,
        points: pts.len(),
    })
}
