//! Path generation on a time grid.
//!
//! Finite-activity jumps (atoms and the part of the density beyond the
//! cutoff) are generated exactly from exponential gaps, so their times are
//! not rounded to the grid. Between jumps the path moves by Gaussian and
//! stable increments. Density jumps smaller than the cutoff are replaced by
//! a Gaussian with the same mean and variance.
//!
//! Paths are streamed through a [`PathVisitor`], which may stop a path early.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::boundary::Boundary;
use crate::error::{Error, Result};
use crate::levy_model::{validate_triplet, LevyTriplet, StablePart};
use crate::rng::{RngStamp, LANE_DIFFUSION, LANE_JUMPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt_max: f64,
    pub small_jump_cutoff: f64,
    pub bridge_correction: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_max: 0.01,
            small_jump_cutoff: 1e-3,
            bridge_correction: true,
        }
    }
}

impl SimConfig {
    pub fn new(dt_max: f64, bridge_correction: bool) -> Self {
        SimConfig {
            dt_max,
            bridge_correction,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::arg(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.small_jump_cutoff > 0.0 && self.small_jump_cutoff <= 1.0) {
            return Err(Error::arg(format!(
                "small_jump_cutoff must lie in (0, 1], got {}",
                self.small_jump_cutoff
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpOrigin {
    Atom(usize),
    Density,
    /// Extra jump added by an importance-sampling tilt.
    Tilt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub size: f64,
    pub origin: JumpOrigin,
    /// `X(time−)`.
    pub pre_value: f64,
}

/// A simulated trajectory: grid values plus every finite-activity jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSkeleton {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub jump_records: Vec<JumpRecord>,
    pub rng_stamp: RngStamp,
    /// Variance rate of the Gaussian part between knots (σ² plus the
    /// small-jump surrogate); zero when a stable component is present, since
    /// then no bridge formula applies.
    pub bridge_variance: f64,
}

impl PathSkeleton {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Writes `t,x` rows and a `time,size,origin` sidecar.
    pub fn write_csv(&self, values: &Path, jumps: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(values)?);
        writeln!(w, "t,x")?;
        for (t, x) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{x}")?;
        }
        w.flush()?;
        let mut w = BufWriter::new(File::create(jumps)?);
        writeln!(w, "time,size,origin")?;
        for j in &self.jump_records {
            let origin = match j.origin {
                JumpOrigin::Atom(i) => format!("atom_{i}"),
                JumpOrigin::Density => "density".into(),
                JumpOrigin::Tilt => "tilt".into(),
            };
            writeln!(w, "{},{},{origin}", j.time, j.size)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Replays the skeleton through a visitor.
    pub fn replay<V: PathVisitor>(&self, v: &mut V) {
        if self.values.is_empty() || !v.start(self.values[0]) {
            return;
        }
        let mut jumps = self.jump_records.iter().peekable();
        for i in 1..self.times.len() {
            let (mut t, mut x) = (self.times[i - 1], self.values[i - 1]);
            while let Some(j) = jumps.next_if(|j| j.time <= self.times[i]) {
                if !v.segment(t, x, j.time, j.pre_value, Knot::Jump) || !v.jump(j) {
                    return;
                }
                t = j.time;
                x = j.pre_value + j.size;
            }
            if !v.segment(t, x, self.times[i], self.values[i], Knot::Grid(i)) {
                return;
            }
        }
    }
}

/// The knot a continuous segment ends at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knot {
    Grid(usize),
    Jump,
}

/// Receives a path as it is generated. Returning `false` stops the path.
pub trait PathVisitor {
    fn start(&mut self, _x0: f64) -> bool {
        true
    }

    /// Continuous motion from `(t0, x0)` to `(t1, x1)`.
    fn segment(&mut self, t0: f64, x0: f64, t1: f64, x1: f64, end: Knot) -> bool;

    fn jump(&mut self, jump: &JumpRecord) -> bool;
}

/// The uniform grid `t_i = i·T/k` with `k = ⌈T/dt_max⌉`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub cells: usize,
    pub step: f64,
    pub horizon: f64,
}

impl Grid {
    pub fn new(horizon: f64, dt_max: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::arg(format!("horizon must be positive, got {horizon}")));
        }
        let cells = (horizon / dt_max).ceil().max(1.0) as usize;
        Ok(Grid {
            cells,
            step: horizon / cells as f64,
            horizon,
        })
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.cells {
            self.horizon
        } else {
            i as f64 * self.step
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.cells).map(|i| self.time(i))
    }

    /// Boundary values on the grid, shared by every path.
    pub fn boundary_values(&self, b: &Boundary) -> Vec<f64> {
        self.times().map(|t| b.eval(t)).collect()
    }
}

#[derive(Debug, Clone)]
enum SizeLaw {
    Fixed(f64),
    /// Uniform pieces `(lo, hi)` chosen by cumulative mass.
    Pieces(Vec<(f64, f64, f64)>),
}

#[derive(Debug, Clone)]
struct Source {
    rate: f64,
    size: SizeLaw,
    origin: JumpOrigin,
}

impl Source {
    fn draw_size<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.size {
            SizeLaw::Fixed(x) => *x,
            SizeLaw::Pieces(pieces) => {
                let total = pieces.last().map_or(0.0, |p| p.2);
                let u = rng.random::<f64>() * total;
                let idx = pieces.partition_point(|p| p.2 <= u).min(pieces.len() - 1);
                let (lo, hi, _) = pieces[idx];
                lo + (hi - lo) * rng.random::<f64>()
            }
        }
    }
}

/// A triplet compiled for simulation.
#[derive(Debug, Clone)]
pub struct PathModel {
    drift: f64,
    gauss_var: f64,
    stable: Option<StablePart>,
    sources: Vec<Source>,
}

impl PathModel {
    pub fn new(t: &LevyTriplet, cfg: &SimConfig) -> Result<Self> {
        validate_triplet(t).into_result()?;
        cfg.validate()?;
        let eps = cfg.small_jump_cutoff;
        let mut sources: Vec<Source> = t
            .jumps
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| Source {
                rate: a.rate,
                size: SizeLaw::Fixed(a.location),
                origin: JumpOrigin::Atom(i),
            })
            .collect();

        let mut small_mean = 0.0;
        let mut small_var = 0.0;
        let mut pieces = Vec::new();
        let mut cum = 0.0;
        for bin in &t.jumps.density {
            small_mean += bin.moment_on(1, -eps, eps);
            small_var += bin.moment_on(2, -eps, eps);
            for (lo, hi) in [(bin.lo, bin.hi.min(-eps)), (bin.lo.max(eps), bin.hi)] {
                if hi > lo && bin.height > 0.0 {
                    cum += bin.height * (hi - lo);
                    pieces.push((lo, hi, cum));
                }
            }
        }
        if cum > 0.0 {
            sources.push(Source {
                rate: cum,
                size: SizeLaw::Pieces(pieces),
                origin: JumpOrigin::Density,
            });
        }
        Ok(PathModel {
            drift: t.raw_drift() + small_mean,
            gauss_var: t.sigma2 + small_var,
            stable: t.jumps.stable,
            sources,
        })
    }

    /// Variance rate usable by the bridge correction, if any.
    pub fn bridge_variance(&self, cfg: &SimConfig) -> Option<f64> {
        (cfg.bridge_correction && self.stable.is_none() && self.gauss_var > 0.0)
            .then_some(self.gauss_var)
    }

    fn continuous_increment<R: Rng>(&self, tau: f64, rng: &mut R) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let mut dx = self.drift * tau;
        if self.gauss_var > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            dx += (self.gauss_var * tau).sqrt() * z;
        }
        if let Some(s) = self.stable {
            dx += stable_increment(s.alpha, s.scale, s.skew, tau, rng);
        }
        dx
    }
}

/// Extra jumps merged into a path, e.g. by an importance-sampling tilt.
pub(crate) trait ExtraJumps {
    fn begin(&mut self, stamp: RngStamp);
    /// Appends every extra jump with time `≤ until` not yet emitted.
    fn fill(&mut self, until: f64, out: &mut Vec<JumpRecord>);
}

pub(crate) struct NoExtra;

impl ExtraJumps for NoExtra {
    fn begin(&mut self, _stamp: RngStamp) {}
    fn fill(&mut self, _until: f64, _out: &mut Vec<JumpRecord>) {}
}

/// Generates one path and streams it into `v`.
pub(crate) fn drive<V: PathVisitor, E: ExtraJumps>(
    model: &PathModel,
    grid: &Grid,
    stamp: RngStamp,
    extra: &mut E,
    v: &mut V,
    buf: &mut Vec<JumpRecord>,
) {
    let mut rd = stamp.rng(LANE_DIFFUSION);
    let mut rj = stamp.rng(LANE_JUMPS);
    let mut next = [f64::INFINITY; 16];
    let mut next_vec;
    let next: &mut [f64] = if model.sources.len() <= next.len() {
        &mut next[..model.sources.len()]
    } else {
        next_vec = vec![f64::INFINITY; model.sources.len()];
        &mut next_vec
    };
    for (k, s) in model.sources.iter().enumerate() {
        let e: f64 = Exp1.sample(&mut rj);
        next[k] = e / s.rate;
    }
    extra.begin(stamp);

    let mut x = 0.0;
    if !v.start(x) {
        return;
    }
    for i in 0..grid.cells {
        let t0 = grid.time(i);
        let t1 = grid.time(i + 1);
        buf.clear();
        for (k, s) in model.sources.iter().enumerate() {
            while next[k] <= t1 {
                buf.push(JumpRecord {
                    time: next[k],
                    size: s.draw_size(&mut rj),
                    origin: s.origin,
                    pre_value: f64::NAN,
                });
                let e: f64 = Exp1.sample(&mut rj);
                next[k] += e / s.rate;
            }
        }
        extra.fill(t1, buf);
        if buf.len() > 1 {
            buf.sort_unstable_by(|a, b| a.time.total_cmp(&b.time));
        }
        let mut t = t0;
        for j in buf.iter_mut() {
            let xn = x + model.continuous_increment(j.time - t, &mut rd);
            if !v.segment(t, x, j.time, xn, Knot::Jump) {
                return;
            }
            j.pre_value = xn;
            x = xn + j.size;
            t = j.time;
            if !v.jump(j) {
                return;
            }
        }
        let xn = x + model.continuous_increment(t1 - t, &mut rd);
        if !v.segment(t, x, t1, xn, Knot::Grid(i + 1)) {
            return;
        }
        x = xn;
    }
}

#[derive(Default)]
pub(crate) struct Recorder {
    pub values: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
}

impl PathVisitor for Recorder {
    fn start(&mut self, x0: f64) -> bool {
        self.values.push(x0);
        true
    }

    fn segment(&mut self, _t0: f64, _x0: f64, _t1: f64, x1: f64, end: Knot) -> bool {
        if let Knot::Grid(_) = end {
            self.values.push(x1);
        }
        true
    }

    fn jump(&mut self, jump: &JumpRecord) -> bool {
        self.jumps.push(*jump);
        true
    }
}

pub fn sample_path(t: &LevyTriplet, horizon: f64, cfg: &SimConfig, stamp: RngStamp) -> Result<PathSkeleton> {
    let model = PathModel::new(t, cfg)?;
    let grid = Grid::new(horizon, cfg.dt_max)?;
    Ok(sample_with(&model, &grid, cfg, stamp, &mut NoExtra))
}

pub(crate) fn sample_with<E: ExtraJumps>(
    model: &PathModel,
    grid: &Grid,
    cfg: &SimConfig,
    stamp: RngStamp,
    extra: &mut E,
) -> PathSkeleton {
    let mut rec = Recorder::default();
    let mut buf = Vec::new();
    drive(model, grid, stamp, extra, &mut rec, &mut buf);
    PathSkeleton {
        times: grid.times().collect(),
        values: rec.values,
        jump_records: rec.jumps,
        rng_stamp: stamp,
        bridge_variance: model.bridge_variance(cfg).unwrap_or(0.0),
    }
}

/// Tracks whether a path stays below the boundary, with the Brownian-bridge
/// survival factor of each continuous segment.
///
/// Within a segment the boundary is replaced by the chord through its
/// endpoint values, for which the bridge crossing probability
/// `exp(−2 d₀d₁ / (σ²τ))` is exact.
pub(crate) struct Survival<'a> {
    boundary: &'a Boundary,
    grid_values: &'a [f64],
    bridge_var: Option<f64>,
    b_now: f64,
    pub alive: bool,
    pub weight: f64,
}

impl<'a> Survival<'a> {
    pub fn new(boundary: &'a Boundary, grid_values: &'a [f64], bridge_var: Option<f64>) -> Self {
        Survival {
            boundary,
            grid_values,
            bridge_var,
            b_now: grid_values[0],
            alive: true,
            weight: 1.0,
        }
    }

    pub fn outcome(&self) -> f64 {
        if self.alive {
            self.weight
        } else {
            0.0
        }
    }
}

impl PathVisitor for Survival<'_> {
    fn start(&mut self, x0: f64) -> bool {
        self.alive = x0 <= self.b_now;
        self.alive
    }

    fn segment(&mut self, t0: f64, x0: f64, t1: f64, x1: f64, end: Knot) -> bool {
        let b1 = match end {
            Knot::Grid(i) => self.grid_values[i],
            Knot::Jump => self.boundary.eval(t1),
        };
        if !(x1 <= b1) {
            self.alive = false;
            return false;
        }
        if let Some(var) = self.bridge_var {
            let tau = t1 - t0;
            if tau > 0.0 {
                let d0 = self.b_now - x0;
                let d1 = b1 - x1;
                self.weight *= -(-2.0 * d0 * d1 / (var * tau)).exp_m1();
            }
        }
        self.b_now = b1;
        true
    }

    fn jump(&mut self, jump: &JumpRecord) -> bool {
        if !(jump.pre_value + jump.size <= self.b_now) {
            self.alive = false;
        }
        self.alive
    }
}

/// Survival outcome of a finished skeleton: the indicator of staying below
/// `b` at every knot and the bridge correction weight (1 when disabled).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoExit {
    pub indicator: u8,
    pub weight: f64,
}

impl NoExit {
    pub fn value(&self) -> f64 {
        self.indicator as f64 * self.weight
    }
}

pub fn no_exit_indicator(p: &PathSkeleton, b: &Boundary, cfg: &SimConfig) -> NoExit {
    let grid_values: Vec<f64> = p.times.iter().map(|&t| b.eval(t)).collect();
    let var = (cfg.bridge_correction && p.bridge_variance > 0.0).then_some(p.bridge_variance);
    let mut s = Survival::new(b, &grid_values, var);
    p.replay(&mut s);
    NoExit {
        indicator: s.alive as u8,
        weight: if s.alive { s.weight } else { 1.0 },
    }
}

/// An increment over time `dt` of the Lévy process whose exponent is that of
/// `S_α(scale, skew, 0)`, by the Chambers–Mallows–Stuck transform.
pub fn stable_increment<R: Rng + ?Sized>(alpha: f64, scale: f64, skew: f64, dt: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    if alpha == 1.0 {
        let s = scale * dt;
        let z = (2.0 / PI)
            * ((FRAC_PI_2 + skew * v) * v.tan()
                - skew * ((FRAC_PI_2 * w * v.cos()) / (FRAC_PI_2 + skew * v)).ln());
        s * z + (2.0 / PI) * skew * s * s.ln()
    } else {
        let zeta = skew * (PI * alpha / 2.0).tan();
        let b = zeta.atan() / alpha;
        let sfac = (1.0 + zeta * zeta).powf(1.0 / (2.0 * alpha));
        let z = sfac * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
            * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
        scale * dt.powf(1.0 / alpha) * z
    }
}

pub fn sample_stable_increment(alpha: f64, scale: f64, skew: f64, dt: f64, stamp: RngStamp) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::arg(format!("stable alpha {alpha} outside (0, 2]")));
    }
    if !(dt > 0.0) || !(scale > 0.0) || !(-1.0..=1.0).contains(&skew) {
        return Err(Error::arg("stable increment needs dt > 0, scale > 0, skew in [-1, 1]"));
    }
    let mut rng = stamp.rng(LANE_DIFFUSION);
    Ok(stable_increment(alpha, scale, skew, dt, &mut rng))
}
