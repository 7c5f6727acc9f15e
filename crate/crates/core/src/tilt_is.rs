//! Importance sampling by tilting the jump measure against the boundary.
//!
//! For a boundary `b = c ∓ f` with `f` non-decreasing, jumps in a compact set
//! `A` of the matching sign get intensity `e^{θ(x,s)} ν(dx) ds`, where
//! `θ(x,s) = ln(1 + f′(s)|x|/m)` for `s ≥ s₀` and `m = ∫_A x² ν(dx)`. The
//! extra jumps `(e^θ − 1) ν = f′(s)|x|/m · ν` form a Poisson process that is
//! homogeneous in the operational time `u = f(s) − f(s₀)`, with rate
//! `R = ∫_A |x| ν(dx) / m`. They are generated in `u` and mapped back through
//! `f⁻¹`, which is exact even where `f′` is unbounded.
//!
//! On `[0, T]` the likelihood ratio is
//!
//! ```text
//! ln dP/dQ = R (f(T) − f(s₀)) − Σ_{jumps in A, s ≥ s₀} θ(x, s)
//! ```

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{Boundary, Sign};
use crate::error::{Error, Result};
use crate::levy_model::LevyTriplet;
use crate::rng::{RngStamp, LANE_TILT};
use crate::simulate::{
    drive, ExtraJumps, Grid, JumpOrigin, JumpRecord, Knot, PathModel, PathSkeleton, PathVisitor,
    Recorder, SimConfig, Survival,
};
use crate::stats::{wilson, Estimate, Tally, Z95};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Falling boundary `c − f`, compensated by negative jumps.
    Negative,
    /// Rising boundary `c + f`, compensated by positive jumps.
    Positive,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Negative => -1.0,
            Side::Positive => 1.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Side::Negative => "negative",
            Side::Positive => "positive",
        }
    }
}

/// One piece of the extra-jump size law, with cumulative weight `∫|x| ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Atom { x: f64, cum: f64 },
    /// Density piece `[lo, hi]` with constant height.
    Flat { lo: f64, hi: f64, cum: f64 },
}

impl Piece {
    fn cum(&self) -> f64 {
        match *self {
            Piece::Atom { cum, .. } | Piece::Flat { cum, .. } => cum,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TiltSpec {
    pub side: Side,
    pub support: (f64, f64),
    pub m: f64,
    pub active_from: f64,
    boundary: Boundary,
    /// `∫_A |x| ν(dx) / m`.
    extra_rate: f64,
    pieces: Vec<Piece>,
}

/// Candidate jump mass on one side: atoms and density pieces away from 0.
fn side_components(t: &LevyTriplet, side: Side, cutoff: f64) -> (Vec<(f64, f64)>, Vec<(f64, f64, f64)>) {
    let (lo, hi) = match side {
        Side::Negative => (-1.0, -cutoff),
        Side::Positive => (cutoff, 1.0),
    };
    let atoms = t
        .jumps
        .atoms
        .iter()
        .filter(|a| a.location >= lo && a.location <= hi && a.location != 0.0)
        .map(|a| (a.location, a.rate))
        .collect();
    let dens = t
        .jumps
        .density
        .iter()
        .filter_map(|b| {
            let (l, h) = (b.lo.max(lo), b.hi.min(hi));
            (h > l && b.height > 0.0).then_some((l, h, b.height))
        })
        .collect();
    (atoms, dens)
}

/// x²-mass quantile: smallest x with mass on (−∞, x] at least `q`.
fn x2_quantile(atoms: &[(f64, f64)], dens: &[(f64, f64, f64)], q: f64) -> f64 {
    // breakpoints in increasing x
    let mut items: Vec<(f64, f64, Option<(f64, f64)>)> = Vec::new();
    for &(x, rate) in atoms {
        items.push((x, x * x * rate, None));
    }
    for &(lo, hi, h) in dens {
        items.push((lo, h * (hi.powi(3) - lo.powi(3)) / 3.0, Some((hi, h))));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = items.iter().map(|i| i.1).sum();
    let target = q * total;
    let mut cum = 0.0;
    for &(x, mass, dens) in &items {
        if cum + mass >= target * (1.0 - 1e-12) {
            return match dens {
                None => x,
                Some((_, h)) => (x.powi(3) + 3.0 * (target - cum).max(0.0) / h).cbrt(),
            };
        }
        cum += mass;
    }
    items.last().map_or(0.0, |i| i.2.map_or(i.0, |d| d.0))
}

/// Compensator `F = ±b` of the boundary, non-decreasing when the side matches.
fn compensator(b: &Boundary, side: Side, t: f64) -> f64 {
    side.sign() * b.eval(t)
}

fn check_slope(b: &Boundary, side: Side, horizon_hint: f64) -> Result<()> {
    let ok = match *b {
        Boundary::Constant(_) => true,
        Boundary::Power { gamma, sign, .. } => {
            gamma == 0.0
                || matches!((side, sign), (Side::Negative, Sign::Minus) | (Side::Positive, Sign::Plus))
        }
        Boundary::Custom(_) => {
            let top = horizon_hint.max(10.0).ln();
            (0..=1000).all(|i| {
                let s = (top * i as f64 / 1000.0).exp() - 1.0;
                side.sign() * b.deriv(s) >= -1e-12
            })
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidBoundary(format!(
            "a {} tilt needs a boundary that is {} in t",
            side.name(),
            if side == Side::Negative { "non-increasing" } else { "non-decreasing" }
        )))
    }
}

impl TiltSpec {
    /// `θ(x, s)`.
    pub fn theta(&self, x: f64, s: f64) -> f64 {
        if s < self.active_from || x < self.support.0 || x > self.support.1 {
            return 0.0;
        }
        (self.slope(s) * x.abs() / self.m).ln_1p()
    }

    /// `f′(s) ≥ 0`.
    pub fn slope(&self, s: f64) -> f64 {
        (self.side.sign() * self.boundary.deriv(s)).max(0.0)
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    /// `∫_A |x| ν(dx) / m`, the extra-jump rate per unit of `f`.
    pub fn extra_rate(&self) -> f64 {
        self.extra_rate
    }

    pub fn is_zero(&self) -> bool {
        self.extra_rate == 0.0 || matches!(self.boundary, Boundary::Constant(_))
            || matches!(self.boundary, Boundary::Power { gamma, .. } if gamma == 0.0)
    }

    fn in_support(&self, x: f64) -> bool {
        x >= self.support.0 && x <= self.support.1
    }

    /// Operational time `f(s) − f(s₀)`, zero before `s₀`.
    pub fn op_time(&self, s: f64) -> f64 {
        if s <= self.active_from {
            return 0.0;
        }
        (compensator(&self.boundary, self.side, s) - compensator(&self.boundary, self.side, self.active_from)).max(0.0)
    }

    /// Smallest `s ≥ s₀` with `op_time(s) ≥ u`, searching up to `upper`.
    fn op_inverse(&self, u: f64, upper: f64) -> f64 {
        let s0 = self.active_from;
        let f0 = compensator(&self.boundary, self.side, s0);
        match self.boundary {
            Boundary::Power { gamma, offset, .. } if gamma > 0.0 => {
                // F(t) = ±offset + t^γ
                let base = f0 + u - self.side.sign() * offset;
                base.max(0.0).powf(1.0 / gamma).max(s0)
            }
            _ => {
                let (mut lo, mut hi) = (s0, upper);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.op_time(mid) >= u {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo <= 1e-14 * hi {
                        break;
                    }
                }
                hi
            }
        }
    }

    /// `∫_0^T ∫ (e^θ − 1) ν(dx) ds`.
    pub fn compensator_integral(&self, horizon: f64) -> f64 {
        self.extra_rate * self.op_time(horizon)
    }

    fn draw_extra_size<R: Rng>(&self, rng: &mut R) -> f64 {
        let total = self.pieces.last().map_or(0.0, Piece::cum);
        let u = rng.random::<f64>() * total;
        let idx = self.pieces.partition_point(|p| p.cum() <= u).min(self.pieces.len() - 1);
        match self.pieces[idx] {
            Piece::Atom { x, .. } => x,
            Piece::Flat { lo, hi, .. } => {
                // density ∝ |x| on a piece of fixed sign
                let v = rng.random::<f64>();
                let s = lo.signum();
                s * (lo * lo + v * (hi * hi - lo * lo)).sqrt()
            }
        }
    }
}

/// The tilt for `b` with `A` covering the central 90% of the x²-mass of the
/// finite-activity jumps of the required sign within `[−1, 1]`.
pub fn make_tilt(t: &LevyTriplet, b: &Boundary, side: Side, active_from: f64) -> Result<TiltSpec> {
    let (atoms, dens) = side_components(t, side, SimConfig::default().small_jump_cutoff);
    if atoms.is_empty() && dens.is_empty() {
        return Err(Error::NoJumpsOfRequiredSign { side: side.name() });
    }
    let lo = x2_quantile(&atoms, &dens, 0.05);
    let hi = x2_quantile(&atoms, &dens, 0.95);
    make_tilt_on(t, b, side, active_from, (lo, hi))
}

/// The tilt with an explicit support `A = [lo, hi]`.
pub fn make_tilt_on(
    t: &LevyTriplet,
    b: &Boundary,
    side: Side,
    active_from: f64,
    support: (f64, f64),
) -> Result<TiltSpec> {
    crate::levy_model::validate_triplet(t).into_result()?;
    let (lo, hi) = support;
    let admissible = match side {
        Side::Negative => -1.0 <= lo && lo <= hi && hi < 0.0,
        Side::Positive => 0.0 < lo && lo <= hi && hi <= 1.0,
    };
    if !admissible {
        return Err(Error::arg(format!(
            "support [{lo}, {hi}] is not a compact subset of the {} unit interval",
            side.name()
        )));
    }
    if !(active_from >= 0.0) {
        return Err(Error::arg("active_from must be nonnegative"));
    }
    check_slope(b, side, 1e6)?;
    let (atoms, dens) = side_components(t, side, 0.0);
    let mut pieces = Vec::new();
    let (mut m, mut abs1) = (0.0, 0.0);
    for &(x, rate) in &atoms {
        if x >= lo && x <= hi {
            m += x * x * rate;
            abs1 += x.abs() * rate;
            pieces.push(Piece::Atom { x, cum: abs1 });
        }
    }
    for &(l, h, height) in &dens {
        let (l, h) = (l.max(lo), h.min(hi));
        if h > l {
            m += height * (h.powi(3) - l.powi(3)) / 3.0;
            abs1 += height * (h * h - l * l).abs() / 2.0;
            pieces.push(Piece::Flat { lo: l, hi: h, cum: abs1 });
        }
    }
    if !(m > 0.0) {
        return Err(Error::NoJumpsOfRequiredSign { side: side.name() });
    }
    Ok(TiltSpec {
        side,
        support,
        m,
        active_from,
        boundary: b.clone(),
        extra_rate: abs1 / m,
        pieces,
    })
}

/// Extra tilt jumps, generated lazily in operational time.
struct TiltJumps<'a> {
    spec: &'a TiltSpec,
    horizon: f64,
    u_total: f64,
    rng: Option<ChaCha8Rng>,
    pending: Option<(f64, f64)>,
    u: f64,
}

impl<'a> TiltJumps<'a> {
    fn new(spec: &'a TiltSpec, horizon: f64) -> Self {
        TiltJumps {
            spec,
            horizon,
            u_total: spec.op_time(horizon),
            rng: None,
            pending: None,
            u: 0.0,
        }
    }

    fn advance(&mut self) {
        self.pending = None;
        if self.spec.extra_rate == 0.0 || self.u_total == 0.0 {
            return;
        }
        let rng = self.rng.as_mut().expect("begin called");
        let e: f64 = Exp1.sample(rng);
        self.u += e / self.spec.extra_rate;
        if self.u <= self.u_total {
            let s = self.spec.op_inverse(self.u, self.horizon).min(self.horizon);
            let x = self.spec.draw_extra_size(rng);
            self.pending = Some((s, x));
        }
    }
}

impl ExtraJumps for TiltJumps<'_> {
    fn begin(&mut self, stamp: RngStamp) {
        self.rng = Some(stamp.rng(LANE_TILT));
        self.u = 0.0;
        self.advance();
    }

    fn fill(&mut self, until: f64, out: &mut Vec<JumpRecord>) {
        while let Some((s, x)) = self.pending {
            if s > until {
                break;
            }
            out.push(JumpRecord {
                time: s,
                size: x,
                origin: JumpOrigin::Tilt,
                pre_value: f64::NAN,
            });
            self.advance();
        }
    }
}

/// Accumulates `Σ θ(x_i, s_i)` over jumps in `A` after `s₀`.
struct ThetaSum<'a, V> {
    spec: &'a TiltSpec,
    inner: V,
    sum: f64,
    max_u: f64,
}

impl<V: PathVisitor> PathVisitor for ThetaSum<'_, V> {
    fn start(&mut self, x0: f64) -> bool {
        self.inner.start(x0)
    }

    fn segment(&mut self, t0: f64, x0: f64, t1: f64, x1: f64, end: Knot) -> bool {
        self.inner.segment(t0, x0, t1, x1, end)
    }

    fn jump(&mut self, j: &JumpRecord) -> bool {
        if j.time >= self.spec.active_from && self.spec.in_support(j.size) {
            let u = self.spec.slope(j.time) * j.size.abs() / self.spec.m;
            self.sum += u.ln_1p();
            self.max_u = self.max_u.max(u);
        }
        self.inner.jump(j)
    }
}

/// A path under the tilted law with `ln dP/dQ` on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub path: PathSkeleton,
    pub log_weight: f64,
    /// Largest `f′(s)|x|/m` over the jumps in `A`.
    pub max_u: f64,
}

fn check_spec(t: &LevyTriplet, spec: &TiltSpec, cfg: &SimConfig) -> Result<()> {
    let again = make_tilt_on(t, &spec.boundary, spec.side, spec.active_from, spec.support)?;
    if (again.m - spec.m).abs() > 1e-12 * spec.m {
        return Err(Error::arg("tilt spec was built for a different triplet"));
    }
    if spec.support.0.abs().min(spec.support.1.abs()) < cfg.small_jump_cutoff {
        return Err(Error::arg(
            "tilt support reaches below the small-jump cutoff, where jumps are not explicit",
        ));
    }
    Ok(())
}

pub fn sample_tilted_path(
    t: &LevyTriplet,
    spec: &TiltSpec,
    horizon: f64,
    cfg: &SimConfig,
    stamp: RngStamp,
) -> Result<WeightedSample> {
    check_spec(t, spec, cfg)?;
    let model = PathModel::new(t, cfg)?;
    let grid = Grid::new(horizon, cfg.dt_max)?;
    let mut v = ThetaSum {
        spec,
        inner: Recorder::default(),
        sum: 0.0,
        max_u: 0.0,
    };
    let mut extra = TiltJumps::new(spec, horizon);
    drive(&model, &grid, stamp, &mut extra, &mut v, &mut Vec::new());
    Ok(WeightedSample {
        path: PathSkeleton {
            times: grid.times().collect(),
            values: v.inner.values,
            jump_records: v.inner.jumps,
            rng_stamp: stamp,
            bridge_variance: model.bridge_variance(cfg).unwrap_or(0.0),
        },
        log_weight: spec.compensator_integral(horizon) - v.sum,
        max_u: v.max_u,
    })
}

/// The boundary the tilted process effectively faces: `b(min(t, s₀))`.
pub fn compensated_boundary(spec: &TiltSpec) -> Boundary {
    let b = spec.boundary.clone();
    let s0 = spec.active_from;
    let level = b.eval(s0);
    match b {
        Boundary::Constant(_) => b,
        _ => {
            let b2 = b.clone();
            Boundary::custom(
                "compensated",
                move |t| if t <= s0 { b.eval(t) } else { level },
                move |t| if t <= s0 { b2.deriv(t) } else { 0.0 },
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsEstimate {
    pub estimate: Estimate,
    /// Effective sample size `(Σ v)² / Σ v²`.
    pub ess: f64,
    pub max_u: f64,
    pub warning: Option<String>,
}

const MIN_ESS: f64 = 10.0;

/// `E_Q[e^{ln dP/dQ} · 1{X ≤ b on [0,T]}]` over paths `0..n_paths`.
///
/// Surviving paths are rescaled by the largest log-weight `L` so every
/// summand lies in `[0, 1]` and the exact tally applies; the estimate is
/// `e^L` times the tallied mean. Under zero tilt `L = 0` and the result is
/// identical to [`crate::passage_mc::estimate_survival`].
#[allow(clippy::too_many_arguments)]
pub fn is_estimate_survival(
    t: &LevyTriplet,
    b: &Boundary,
    spec: &TiltSpec,
    horizon: f64,
    n_paths: u64,
    cfg: &SimConfig,
    seed: u64,
) -> Result<IsEstimate> {
    is_estimate_batch(t, b, spec, horizon, n_paths, cfg, seed, 0)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn is_estimate_batch(
    t: &LevyTriplet,
    b: &Boundary,
    spec: &TiltSpec,
    horizon: f64,
    n_paths: u64,
    cfg: &SimConfig,
    seed: u64,
    batch: u64,
) -> Result<IsEstimate> {
    if n_paths < crate::passage_mc::MIN_PATHS {
        return Err(Error::arg(format!("need at least 100 paths, got {n_paths}")));
    }
    check_spec(t, spec, cfg)?;
    let model = PathModel::new(t, cfg)?;
    let grid = Grid::new(horizon, cfg.dt_max)?;
    let gv = grid.boundary_values(b);
    let bridge = model.bridge_variance(cfg);
    let k = spec.compensator_integral(horizon);

    let outcomes: Vec<(f64, f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let stamp = RngStamp::for_path(seed, batch, i);
            let mut v = ThetaSum {
                spec,
                inner: Survival::new(b, &gv, bridge),
                sum: 0.0,
                max_u: 0.0,
            };
            let mut extra = TiltJumps::new(spec, horizon);
            drive(&model, &grid, stamp, &mut extra, &mut v, buf);
            let w = v.inner.outcome();
            if w > 0.0 {
                (k - v.sum, w, v.max_u)
            } else {
                (f64::NEG_INFINITY, 0.0, v.max_u)
            }
        })
        .collect();

    let scale = outcomes
        .iter()
        .filter(|o| o.1 > 0.0)
        .map(|o| o.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if scale.is_finite() { scale } else { 0.0 };
    let tally = outcomes
        .iter()
        .fold(Tally::default(), |acc, o| acc.push(if o.1 > 0.0 { (o.0 - shift).exp() * o.1 } else { 0.0 }));
    let (s1, s2) = outcomes
        .iter()
        .filter(|o| o.1 > 0.0)
        .map(|o| (o.0 - shift).exp() * o.1)
        .fold((0.0, 0.0), |(a, b), v| (a + v, b + v * v));
    let ess = if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 };
    let max_u = outcomes.iter().map(|o| o.2).fold(0.0, f64::max);

    let factor = shift.exp();
    let p_hat = tally.mean() * factor;
    let std_error = tally.std_error() * factor;
    let (ci_low, ci_high) = if spec.is_zero() {
        wilson(p_hat, n_paths)
    } else {
        ((p_hat - Z95 * std_error).max(0.0), p_hat + Z95 * std_error)
    };
    let warning = (ess < MIN_ESS).then(|| {
        format!("effective sample size {ess:.1} is below {MIN_ESS}; the estimate is unreliable")
    });
    Ok(IsEstimate {
        estimate: Estimate {
            p_hat,
            ci_low,
            ci_high,
            std_error,
            n_paths,
        },
        ess,
        max_u,
        warning,
    })
}

/// `Z̃(f(·) − f(s₀))` on the simulation grid, where `Z̃` is the compensated
/// Lévy martingale with jump measure `(|x|/m) 1_A ν(dx)`.
pub fn homogenized_compensator(
    t: &LevyTriplet,
    spec: &TiltSpec,
    horizon: f64,
    cfg: &SimConfig,
    stamp: RngStamp,
) -> Result<PathSkeleton> {
    check_spec(t, spec, cfg)?;
    let grid = Grid::new(horizon, cfg.dt_max)?;
    let mut extra = TiltJumps::new(spec, horizon);
    extra.begin(stamp);
    let mut jumps = Vec::new();
    extra.fill(horizon, &mut jumps);
    // the jump measure (|x|/m) 1_A ν has mean ∫_A x|x|/m ν(dx) = ±1
    let drift = -spec.side.sign();
    let mut values = Vec::with_capacity(grid.cells + 1);
    let mut k = 0;
    let mut level = 0.0;
    for s in grid.times() {
        while k < jumps.len() && jumps[k].time <= s {
            jumps[k].pre_value = level + drift * spec.op_time(jumps[k].time);
            level += jumps[k].size;
            k += 1;
        }
        values.push(level + drift * spec.op_time(s));
    }
    Ok(PathSkeleton {
        times: grid.times().collect(),
        values,
        jump_records: jumps,
        rng_stamp: stamp,
        bridge_variance: 0.0,
    })
}

/// `g(u) = (1 + u) ln(1 + u) − u`.
pub fn g_fn(u: f64) -> f64 {
    (1.0 + u) * u.ln_1p() - u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GCheck {
    pub u_max: f64,
    pub nonnegative: bool,
    /// `sup g(u)/u²` over the checked range.
    pub c_tilde: f64,
}

/// Checks `g ≥ 0` and finds `c̃` with `g(u) ≤ c̃ u²` on a log grid of `(0, u_max]`.
pub fn check_g_bound(u_max: f64, samples: usize) -> GCheck {
    let mut nonnegative = true;
    let mut c_tilde: f64 = 0.0;
    if u_max > 0.0 {
        let n = samples.max(2);
        let lo = (u_max * 1e-6).ln();
        let hi = u_max.ln();
        for i in 0..n {
            let u = (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp();
            let g = g_fn(u);
            nonnegative &= g >= 0.0;
            c_tilde = c_tilde.max(g / (u * u));
        }
    }
    GCheck {
        u_max,
        nonnegative,
        c_tilde,
    }
}
