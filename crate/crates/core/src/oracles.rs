//! Closed-form references and empirical checks of path properties.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::boundary::Boundary;
use crate::error::{Error, Result};
use crate::levy_model::{martingale_normalize, LevyTriplet};
use crate::passage_mc::survival_tally;
use crate::rng::RngStamp;
use crate::simulate::{drive, Grid, JumpRecord, Knot, NoExtra, PathModel, PathVisitor, SimConfig};
use crate::stats::{par_tally, Estimate};

/// `P(sup_{t≤T} σB(t) < a) = 2Φ(a/√(σ²T)) − 1`.
pub fn bm_no_exit_exact(a: f64, sigma2: f64, horizon: f64) -> Result<f64> {
    if !(a > 0.0 && sigma2 > 0.0 && horizon > 0.0) {
        return Err(Error::domain(format!(
            "need a, sigma2, T > 0, got a={a}, sigma2={sigma2}, T={horizon}"
        )));
    }
    Ok(erf(a / (2.0 * sigma2 * horizon).sqrt()))
}

/// Positivity parameter `ρ = P(X(t) > 0)` of a strictly stable law.
pub fn stable_rho(alpha: f64, skew: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) || !(-1.0..=1.0).contains(&skew) {
        return Err(Error::domain(format!("stable parameters ({alpha}, {skew}) out of range")));
    }
    if alpha == 1.0 && skew != 0.0 {
        return Err(Error::domain("alpha = 1 with nonzero skew is not strictly stable"));
    }
    let rho = 0.5 + (skew * (PI * alpha / 2.0).tan()).atan() / (PI * alpha);
    Ok(rho.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
}

/// Estimates of `P(X(t) > 0)` at one probe time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub t: f64,
    pub estimate: Estimate,
}

struct FinalValue(f64);

impl PathVisitor for FinalValue {
    fn segment(&mut self, _t0: f64, _x0: f64, _t1: f64, x1: f64, _end: Knot) -> bool {
        self.0 = x1;
        true
    }

    fn jump(&mut self, j: &JumpRecord) -> bool {
        self.0 = j.pre_value + j.size;
        true
    }
}

/// Monte Carlo estimates of `P(X(t) > 0)` at each probe time, one stream
/// batch per probe. Each marginal is drawn in a single cell, which is exact
/// for every part of the process except the small-jump surrogate.
pub fn spitzer_rho_estimate(
    t: &LevyTriplet,
    probes: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<Vec<RhoEstimate>> {
    if probes.is_empty() {
        return Err(Error::arg("need at least one probe time"));
    }
    let cfg = SimConfig { bridge_correction: false, ..SimConfig::default() };
    let model = PathModel::new(t, &cfg)?;
    probes
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let grid = Grid::new(p, p)?;
            let tally = par_tally(n_paths, Vec::new, |i, buf| {
                let mut v = FinalValue(0.0);
                drive(&model, &grid, RngStamp::for_path(seed, j as u64, i), &mut NoExtra, &mut v, buf);
                (v.0 > 0.0) as u8 as f64
            });
            Ok(RhoEstimate { t: p, estimate: Estimate::from_tally(&tally) })
        })
        .collect()
}

/// `b` on `[from, ∞)` and `+∞` before, so that a survival estimate over
/// `[0, T]` only constrains the window `[from, T]`. `from` should be a grid
/// point of the simulation for the window start to be exact.
pub fn windowed(b: &Boundary, from: f64) -> Boundary {
    let (f, df) = (b.clone(), b.clone());
    Boundary::custom(
        format!("{} on [{from}, inf)", b.spec().map_or("custom".into(), |s| format!("{s:?}"))),
        move |t| if t < from { f64::INFINITY } else { f.eval(t) },
        move |t| if t < from { 0.0 } else { df.deriv(t) },
    )
}

/// `P(X(t) ≤ f(t), a ≤ t ≤ c)` over paths of stream batch `batch`.
#[allow(clippy::too_many_arguments)]
pub fn window_survival(
    t: &LevyTriplet,
    f: &Boundary,
    a: f64,
    c: f64,
    n_paths: u64,
    cfg: &SimConfig,
    seed: u64,
    batch: u64,
) -> Result<Estimate> {
    if !(0.0 <= a && a < c) {
        return Err(Error::arg(format!("window needs 0 <= a < c, got [{a}, {c}]")));
    }
    let model = PathModel::new(t, cfg)?;
    let b = if a > 0.0 { windowed(f, a) } else { f.clone() };
    let tally = survival_tally(&model, &b, c, 0..n_paths, cfg, seed, batch)?;
    Ok(Estimate::from_tally(&tally))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub seed: u64,
    /// Step used by every check except the exceedance and plateau checks.
    pub dt: f64,
    pub association_trials: usize,
    pub association_paths: u64,
    pub helpln_paths: u64,
    pub bbgr_paths: u64,
    pub bbgr_c: f64,
    pub bbgr_safety: f64,
    pub coup_paths: u64,
    pub coup_alpha: f64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        LemmaConfig {
            seed: 2024,
            dt: 1.0 / 16.0,
            association_trials: 20,
            association_paths: 20_000,
            helpln_paths: 20_000,
            bbgr_paths: 100_000,
            bbgr_c: 1.0,
            bbgr_safety: 10.0,
            coup_paths: 20_000,
            coup_alpha: 0.6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssociationTrial {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p_ac: f64,
    pub p_ab: f64,
    pub p_bc: f64,
    pub se: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HelplnRow {
    pub horizon: f64,
    /// End of the first factor's window, `min((ln T)^21, T)`.
    pub window: f64,
    pub lhs: f64,
    pub first: f64,
    pub second: f64,
    pub rhs: f64,
    pub se: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExceedanceCheck {
    pub horizon: f64,
    pub c: f64,
    pub paths: u64,
    pub frequency: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlateauCheck {
    pub alpha: f64,
    pub horizons: Vec<f64>,
    pub estimates: Vec<f64>,
    pub floor: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub association: Vec<AssociationTrial>,
    pub association_violations: usize,
    pub helpln: Vec<HelplnRow>,
    pub exceedance: ExceedanceCheck,
    pub plateau: PlateauCheck,
}

impl LemmaReport {
    pub fn association_passed(&self) -> bool {
        self.association_violations == 0
    }

    pub fn helpln_passed(&self) -> bool {
        self.helpln.iter().all(|r| r.holds)
    }

    pub fn passed(&self) -> bool {
        self.association_passed() && self.helpln_passed() && self.exceedance.holds && self.plateau.holds
    }
}

/// Supermultiplicativity over adjacent windows for Brownian motion below
/// `f ≡ 1`, with `b` the geometric midpoint of `[a, c]`.
pub fn check_association(cfg: &LemmaConfig) -> Result<Vec<AssociationTrial>> {
    let bm = LevyTriplet::brownian(1.0);
    let f = Boundary::constant(1.0);
    let sim = SimConfig::new(cfg.dt, true);
    let n = cfg.association_paths;
    (0..cfg.association_trials)
        .map(|k| {
            let a = 2f64.powi(k as i32 % 5 - 3);
            let ratio = if (k / 5) % 2 == 0 { 4.0 } else { 16.0 };
            let c = a * ratio;
            let b = (a * c).sqrt();
            let batch = 3 * k as u64;
            let ac = window_survival(&bm, &f, a, c, n, &sim, cfg.seed, batch)?;
            let ab = window_survival(&bm, &f, a, b, n, &sim, cfg.seed, batch + 1)?;
            let bc = window_survival(&bm, &f, b, c, n, &sim, cfg.seed, batch + 2)?;
            let prod = ab.p_hat * bc.p_hat;
            let se = (ac.std_error.powi(2)
                + (bc.p_hat * ab.std_error).powi(2)
                + (ab.p_hat * bc.std_error).powi(2))
            .sqrt();
            Ok(AssociationTrial {
                a,
                b,
                c,
                p_ac: ac.p_hat,
                p_ab: ab.p_hat,
                p_bc: bc.p_hat,
                se,
                violated: ac.p_hat < prod - 2.0 * se,
            })
        })
        .collect()
}

/// `P(X ≤ 3 on [0, T]) ≥ ½ P(X ≤ 3 − t^{1/3} on [0, W]) · P(X ≤ 3 + (ln T)^6 on [1, T])`
/// with `W = min((ln T)^21, T)`. Shortening the first window only enlarges
/// the right side, so the check is conservative. `dt` must divide 1.
pub fn check_helpln(t: &LevyTriplet, horizon: f64, cfg: &LemmaConfig, batch: u64) -> Result<HelplnRow> {
    let sim = SimConfig::new(cfg.dt, true);
    let n = cfg.helpln_paths;
    let lt = horizon.ln();
    let window = lt.powi(21).min(horizon);
    let lhs = window_survival(t, &Boundary::constant(3.0), 0.0, horizon, n, &sim, cfg.seed, batch)?;
    let falling = Boundary::power(1.0 / 3.0, crate::boundary::Sign::Minus, 3.0)?;
    let first = window_survival(t, &falling, 0.0, window, n, &sim, cfg.seed, batch + 1)?;
    let high = Boundary::constant(3.0 + lt.powi(6));
    let second = window_survival(t, &high, 1.0, horizon, n, &sim, cfg.seed, batch + 2)?;
    let rhs = 0.5 * first.p_hat * second.p_hat;
    let se = (lhs.std_error.powi(2)
        + (0.5 * second.p_hat * first.std_error).powi(2)
        + (0.5 * first.p_hat * second.std_error).powi(2))
    .sqrt();
    Ok(HelplnRow {
        horizon,
        window,
        lhs: lhs.p_hat,
        first: first.p_hat,
        second: second.p_hat,
        rhs,
        se,
        holds: lhs.p_hat >= rhs - 2.0 * se,
    })
}

/// Frequency of `B(t) > c·max{(ln T)^5, t^{3/4}}` somewhere on `[0, T]`
/// against `safety · e^{−(ln T)²/4}`.
pub fn check_exceedance(horizon: f64, cfg: &LemmaConfig, batch: u64) -> Result<ExceedanceCheck> {
    let lt = horizon.ln();
    let c = cfg.bbgr_c;
    let floor = lt.powi(5);
    let h = Boundary::custom(
        "c max{(ln T)^5, t^(3/4)}",
        move |t| c * floor.max(t.powf(0.75)),
        move |t| if t.powf(0.75) > floor { 0.75 * c * t.powf(-0.25) } else { 0.0 },
    );
    // the boundary sits many standard deviations above the path, so a unit step with
    // the bridge correction resolves it
    let sim = SimConfig::new(1.0, true);
    let est = window_survival(
        &LevyTriplet::brownian(1.0),
        &h,
        0.0,
        horizon,
        cfg.bbgr_paths,
        &sim,
        cfg.seed,
        batch,
    )?;
    let frequency = (1.0 - est.p_hat).max(0.0);
    let bound = cfg.bbgr_safety * (-lt * lt / 4.0).exp();
    Ok(ExceedanceCheck {
        horizon,
        c,
        paths: cfg.bbgr_paths,
        frequency,
        bound,
        holds: frequency == 0.0 || frequency < bound,
    })
}

/// `P(X(t) ≤ t^α, 1 ≤ t ≤ T)` for the compensated unit-rate Poisson
/// martingale with jumps `−1`, over `T = 2^4, …, 2^12`. Between jumps the
/// path rises linearly and the boundary is concave, so checking knots is
/// exact and a unit step suffices.
pub fn check_plateau(cfg: &LemmaConfig, batch: u64) -> Result<PlateauCheck> {
    let x = martingale_normalize(&LevyTriplet::zero().with_atom(-1.0, 1.0))?;
    let f = Boundary::power(cfg.coup_alpha, crate::boundary::Sign::Plus, 0.0)?;
    let sim = SimConfig::new(1.0, false);
    let horizons: Vec<f64> = (4..=12).map(|k| 2f64.powi(k)).collect();
    let estimates = horizons
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            window_survival(&x, &f, 1.0, h, cfg.coup_paths, &sim, cfg.seed, batch + j as u64).map(|e| e.p_hat)
        })
        .collect::<Result<Vec<_>>>()?;
    let floor = estimates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PlateauCheck {
        alpha: cfg.coup_alpha,
        holds: floor > 0.0 && floor >= 0.5 * estimates[0],
        horizons,
        estimates,
        floor,
    })
}

/// Runs the four empirical lemma checks. The helpln check uses Brownian
/// motion plus martingale-compensated jumps of size `−1/2`.
pub fn lemma_checks(cfg: &LemmaConfig) -> Result<LemmaReport> {
    let association = check_association(cfg)?;
    let association_violations = association.iter().filter(|t| t.violated).count();
    let jumpy = martingale_normalize(&LevyTriplet::brownian(1.0).with_atom(-0.5, 1.0))?;
    let base = 1000;
    let helpln = [64.0, 256.0]
        .iter()
        .enumerate()
        .map(|(j, &h)| check_helpln(&jumpy, h, cfg, base + 3 * j as u64))
        .collect::<Result<Vec<_>>>()?;
    let exceedance = check_exceedance(1024.0, cfg, 2000)?;
    let plateau = check_plateau(cfg, 3000)?;
    Ok(LemmaReport {
        association,
        association_violations,
        helpln,
        exceedance,
        plateau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub a: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub exact: f64,
    pub p_hat: f64,
    pub std_error: f64,
    /// `(p̂ − p)/SE`.
    pub z: f64,
}

impl CalibrationRow {
    pub fn within(&self, k: f64) -> bool {
        self.z.abs() <= k
    }
}

/// Crude estimates for Brownian motion below `f ≡ a` against the closed
/// form, with step `dt_factor·√T` and one stream batch per grid cell.
pub fn calibration_grid(
    levels: &[f64],
    horizons: &[f64],
    n_paths: u64,
    dt_factor: f64,
    seed: u64,
) -> Result<Vec<CalibrationRow>> {
    let bm = LevyTriplet::brownian(1.0);
    let mut rows = Vec::new();
    for (i, &a) in levels.iter().enumerate() {
        for (j, &h) in horizons.iter().enumerate() {
            let cfg = SimConfig::new(dt_factor * h.sqrt(), true);
            let model = PathModel::new(&bm, &cfg)?;
            let batch = (i * horizons.len() + j) as u64;
            let tally = survival_tally(&model, &Boundary::constant(a), h, 0..n_paths, &cfg, seed, batch)?;
            let e = Estimate::from_tally(&tally);
            let exact = bm_no_exit_exact(a, 1.0, h)?;
            rows.push(CalibrationRow {
                a,
                horizon: h,
                exact,
                p_hat: e.p_hat,
                std_error: e.std_error,
                z: (e.p_hat - exact) / e.std_error.max(f64::MIN_POSITIVE),
            });
        }
    }
    Ok(rows)
}

pub fn write_calibration_csv(rows: &[CalibrationRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_closed_form_values() {
        assert!((bm_no_exit_exact(1.0, 1.0, 1.0).unwrap() - 0.682_689_492_137).abs() < 1e-9);
        assert!((bm_no_exit_exact(1.0, 4.0, 1.0).unwrap() - 0.382_924_922_548).abs() < 1e-9);
        assert!(bm_no_exit_exact(1.0, 1.0, 1e30).unwrap() < 1e-14);
        assert!(bm_no_exit_exact(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn brownian_closed_form_is_monotone() {
        let mut prev = 1.0;
        for k in 0..40 {
            let p = bm_no_exit_exact(1.0, 1.0, 0.1 * 1.5f64.powi(k)).unwrap();
            assert!(p < prev);
            prev = p;
        }
        let mut prev = 0.0;
        for k in 1..40 {
            let p = bm_no_exit_exact(0.1 * k as f64, 1.0, 4.0).unwrap();
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn stable_rho_values() {
        for alpha in [0.3, 1.0, 1.5, 1.9] {
            assert_eq!(stable_rho(alpha, 0.0).unwrap(), 0.5);
        }
        assert!((stable_rho(1.5, -1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((stable_rho(1.5, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(stable_rho(1.0, 0.5).is_err());
        for (a, b) in [(0.5, 0.3), (1.2, -0.7), (1.8, 1.0)] {
            let s = stable_rho(a, b).unwrap() + stable_rho(a, -b).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_of_brownian_motion() {
        for r in spitzer_rho_estimate(&LevyTriplet::brownian(1.0), &[1.0, 10.0, 100.0], 20_000, 1).unwrap() {
            assert!((r.estimate.p_hat - 0.5).abs() <= 3.0 * r.estimate.std_error, "{r:?}");
        }
    }

    #[test]
    fn rho_of_drifted_brownian_motion() {
        let t = LevyTriplet::brownian(1.0).with_drift(1.0);
        let r = spitzer_rho_estimate(&t, &[400.0], 2_000, 1).unwrap();
        assert_eq!(r[0].estimate.p_hat, 1.0);
    }

    #[test]
    fn rho_of_spectrally_negative_stable() {
        let t = LevyTriplet::zero().with_stable(1.5, 1.0, -1.0);
        let r = spitzer_rho_estimate(&t, &[1.0, 1000.0], 20_000, 2).unwrap();
        assert!(r[1].estimate.contains(2.0 / 3.0), "{:?}", r[1]);
    }

    #[test]
    fn window_survival_matches_reflection_at_zero_start() {
        let bm = LevyTriplet::brownian(1.0);
        let cfg = SimConfig::new(1.0 / 64.0, true);
        let e = window_survival(&bm, &Boundary::constant(1.0), 0.0, 1.0, 20_000, &cfg, 3, 0).unwrap();
        let exact = bm_no_exit_exact(1.0, 1.0, 1.0).unwrap();
        assert!((e.p_hat - exact).abs() < 3.0 * e.std_error + 1e-3, "{e:?} vs {exact}");
    }

    #[test]
    fn window_ignores_the_past() {
        // P(B(t) <= 1, 1 <= t <= 2) = E[P(sup over [0,1] of B(1) + W < 1)]
        let bm = LevyTriplet::brownian(1.0);
        let cfg = SimConfig::new(1.0 / 32.0, true);
        let e = window_survival(&bm, &Boundary::constant(1.0), 1.0, 2.0, 20_000, &cfg, 4, 0).unwrap();
        let full = window_survival(&bm, &Boundary::constant(1.0), 0.0, 2.0, 20_000, &cfg, 4, 1).unwrap();
        assert!(e.p_hat > full.p_hat + 0.05, "{e:?} {full:?}");
    }

    #[test]
    fn calibration_agrees_within_three_se() {
        let rows = calibration_grid(&[0.5, 1.0, 2.0], &[1.0, 4.0], 10_000, 0.01, 5).unwrap();
        for r in &rows {
            assert!(r.within(3.0), "{r:?}");
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cal.csv");
        write_calibration_csv(&rows, &p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("a,T,exact,p_hat,std_error,z"));
    }

    #[test]
    fn small_lemma_battery() {
        let cfg = LemmaConfig {
            association_trials: 5,
            association_paths: 4_000,
            helpln_paths: 2_000,
            bbgr_paths: 2_000,
            coup_paths: 2_000,
            ..LemmaConfig::default()
        };
        let rep = lemma_checks(&cfg).unwrap();
        assert!(rep.passed(), "{rep:#?}");
        assert_eq!(rep.association.len(), 5);
        assert_eq!(rep.plateau.horizons.len(), 9);
    }
}
