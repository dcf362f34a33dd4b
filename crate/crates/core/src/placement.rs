//! Alternating sum-of-ratios placement shared by the downlink and uplink steps.
//!
//! Each ratio gets a slack variable; with the slacks fixed the transformed
//! objective is maximized over the horizontal position (on a quadratic fit of
//! `F`) and then over the altitude (on the exact `F`), after which the slacks
//! are reset to their closed-form optimum. A compass search on the exact
//! sum of ratios finishes each start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{coverage_radius, excess_at_offset, fit_quadratic, horizontal_reach, QuadraticFit};
use crate::error::{Error, Result};
use crate::model::{ChannelParams, Vec2, Vec3};
use crate::numerics::{golden_section_max, grid_max, pattern_search_max, DiscConstraintSet, PatternOptions};

/// Tuning of the placement solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementOptions {
    /// Perturbed starts in addition to the given init and the centroid.
    pub restarts: usize,
    /// Also start from each served device when there are at most this many.
    pub device_starts: usize,
    /// Extra starts above the centroid at evenly spaced altitudes up to the ceiling.
    pub altitude_starts: usize,
    pub max_outer: usize,
    /// Stop when the sum-of-ratios value grows by less than this (relative).
    pub tol: f64,
    pub fit_samples: usize,
    pub altitude_grid: usize,
    pub cccp_max_iters: usize,
    pub cccp_tol: f64,
    /// Finish every start with a compass search on the exact objective.
    pub polish: bool,
    pub seed: u64,
}

impl Default for PlacementOptions {
    fn default() -> Self {
        PlacementOptions {
            restarts: 1,
            device_starts: 0,
            altitude_starts: 2,
            max_outer: 100,
            tol: 1e-6,
            fit_samples: 200,
            altitude_grid: 50,
            cccp_max_iters: 30,
            cccp_tol: 1e-4,
            polish: true,
            seed: 0,
        }
    }
}

/// Result of one placement solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementOutcome {
    pub position: Vec3,
    /// Sum of ratios at `position`.
    pub value: f64,
    /// Sum of ratios at the init, `-inf` when the init was infeasible.
    pub initial_value: f64,
    /// Optimal slack of every term at `position`.
    pub slack: Vec<f64>,
    /// Sum of ratios after every alternating iteration of the winning start.
    pub trace: Vec<f64>,
}

/// Ground device that must satisfy `F(d) <= limit` from the UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reach {
    pub center: Vec2,
    pub limit: f64,
}

const LIMIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct Region {
    pub reaches: Vec<Reach>,
    pub channel: ChannelParams,
    pub bounds: (f64, f64),
}

impl Region {
    pub fn feasible(&self, p: &Vec3) -> bool {
        let (lo, hi) = self.bounds;
        if !(p.z >= lo && p.z <= hi) || !p.x.is_finite() || !p.y.is_finite() {
            return false;
        }
        self.reaches.iter().all(|r| {
            let off = (p.xy() - r.center).norm();
            excess_at_offset(off, p.z, &self.channel) <= r.limit * (1.0 + LIMIT_TOL)
        })
    }

    pub fn discs(&self, h: f64) -> Result<Option<DiscConstraintSet>> {
        if self.reaches.is_empty() {
            return Ok(None);
        }
        let mut radii = Vec::with_capacity(self.reaches.len());
        for r in &self.reaches {
            let rad = horizontal_reach(r.limit, h, &self.channel).map_err(|_| Error::InfeasibleRegion)?;
            radii.push(rad.max(1e-9));
        }
        DiscConstraintSet::new(self.reaches.iter().map(|r| r.center).collect(), radii).map(Some)
    }

    /// Largest link distance the region allows at altitude `h`.
    pub fn max_distance(&self, h: f64) -> f64 {
        self.reaches
            .iter()
            .filter_map(|r| coverage_radius(r.limit, h, &self.channel).ok())
            .fold(h, f64::max)
    }

    /// Connected interval of feasible altitudes containing `p.z`.
    pub fn altitude_window(&self, p: &Vec3) -> Option<(f64, f64)> {
        if !self.feasible(p) {
            return None;
        }
        let (lo, hi) = self.bounds;
        let at = |h: f64| self.feasible(&Vec3::new(p.x, p.y, h));
        let n = 120;
        let step = (hi - lo) / n as f64;
        let edge = |mut inside: f64, mut outside: f64| {
            for _ in 0..50 {
                let mid = 0.5 * (inside + outside);
                if at(mid) {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            inside
        };
        let mut a = p.z;
        loop {
            let next = (a - step).max(lo);
            if next >= a {
                break;
            }
            if !at(next) {
                a = edge(a, next);
                break;
            }
            a = next;
        }
        let mut b = p.z;
        loop {
            let next = (b + step).min(hi);
            if next <= b {
                break;
            }
            if !at(next) {
                b = edge(b, next);
                break;
            }
            b = next;
        }
        Some((a, b))
    }
}

/// Golden-section search cross-checked on a grid; never returns worse than `current`.
pub(crate) fn search_altitude(f: impl Fn(f64) -> f64, window: (f64, f64), current: f64, grid: usize) -> f64 {
    let (lo, hi) = window;
    let mut best = (current, f(current));
    if hi - lo > 1e-9 {
        if let Ok((x, v)) = golden_section_max(&f, lo, hi, 1e-6 * (hi - lo).max(1.0)) {
            if v > best.1 {
                best = (x, v);
            }
        }
        let (x, v) = grid_max(&f, lo, hi, grid);
        if v > best.1 {
            best = (x, v);
        }
    }
    best.0
}

/// What a concrete sum-of-ratios placement has to provide to [`solve`].
pub(crate) trait RatioModel: Sync {
    fn region(&self) -> &Region;
    fn centers(&self) -> Vec<Vec2>;
    /// Exact sum of ratios.
    fn value(&self, p: &Vec3) -> f64;
    /// Closed-form optimal slacks.
    fn slack(&self, p: &Vec3) -> Vec<f64>;
    /// Transformed objective at fixed slacks.
    fn transformed(&self, p: &Vec3, slack: &[f64]) -> f64;
    /// Horizontal step on the fitted surrogate.
    fn planar_step(
        &self,
        p: &Vec3,
        slack: &[f64],
        fit: &QuadraticFit,
        discs: &DiscConstraintSet,
        opts: &PlacementOptions,
    ) -> Result<Vec2>;
}

fn fit_at<M: RatioModel>(model: &M, h: f64, opts: &PlacementOptions) -> Option<QuadraticFit> {
    let hi = (3.0 * h).max(model.region().max_distance(h));
    fit_quadratic(h, &model.region().channel, (h, hi), opts.fit_samples).ok()
}

fn start_points<M: RatioModel>(model: &M, init: &Vec3, opts: &PlacementOptions) -> Vec<Vec3> {
    let centers = model.centers();
    let mut starts = vec![*init];
    if centers.is_empty() {
        return starts;
    }
    let centroid = centers.iter().fold(Vec2::zeros(), |a, c| a + c) / centers.len() as f64;
    let spread = centers.iter().map(|c| (c - centroid).norm()).fold(5.0, f64::max);
    starts.push(Vec3::new(centroid.x, centroid.y, init.z));
    let (lo, hi) = model.region().bounds;
    for s in 1..=opts.altitude_starts {
        let h = lo + (hi - lo) * s as f64 / opts.altitude_starts as f64;
        starts.push(Vec3::new(centroid.x, centroid.y, h));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let r = spread * rng.gen::<f64>().sqrt();
        let t = std::f64::consts::TAU * rng.gen::<f64>();
        starts.push(Vec3::new(centroid.x + r * t.cos(), centroid.y + r * t.sin(), init.z));
    }
    if centers.len() <= opts.device_starts {
        starts.extend(centers.iter().map(|c| Vec3::new(c.x, c.y, init.z)));
    }
    starts
}

/// Moves an infeasible start into the region: project at its altitude, then
/// try the other altitudes on a coarse grid.
fn make_feasible<M: RatioModel>(model: &M, start: &Vec3) -> Option<Vec3> {
    let region = model.region();
    let (lo, hi) = region.bounds;
    let z0 = start.z.clamp(lo, hi);
    let p = Vec3::new(start.x, start.y, z0);
    if region.feasible(&p) {
        return Some(p);
    }
    let mut alts = vec![z0];
    alts.extend((0..=30).map(|s| lo + (hi - lo) * s as f64 / 30.0));
    for h in alts {
        if let Ok(Some(discs)) = region.discs(h) {
            if let Ok(xy) = crate::numerics::project_discs(&start.xy(), &discs) {
                let q = Vec3::new(xy.x, xy.y, h);
                if region.feasible(&q) {
                    return Some(q);
                }
            }
        }
    }
    None
}

fn run_start<M: RatioModel>(model: &M, start: Vec3, opts: &PlacementOptions) -> (Vec3, Vec<f64>) {
    let region = model.region();
    let mut p = start;
    let mut slack = model.slack(&p);
    let mut val = model.value(&p);
    let mut trace = vec![val];
    let mut fit = fit_at(model, p.z, opts);
    for _ in 0..opts.max_outer {
        if fit.is_none_or(|f| (p.z - f.altitude).abs() > 0.1 * f.altitude) {
            fit = fit_at(model, p.z, opts);
        }
        if let (Some(f), Ok(Some(discs))) = (fit.as_ref(), region.discs(p.z)) {
            if let Ok(xy) = model.planar_step(&p, &slack, f, &discs, opts) {
                let cand = Vec3::new(xy.x, xy.y, p.z);
                if region.feasible(&cand) && model.transformed(&cand, &slack) >= model.transformed(&p, &slack) {
                    p = cand;
                }
            }
        }
        if let Some(window) = region.altitude_window(&p) {
            let h = search_altitude(
                |h| model.transformed(&Vec3::new(p.x, p.y, h), &slack),
                window,
                p.z,
                opts.altitude_grid,
            );
            let cand = Vec3::new(p.x, p.y, h);
            if region.feasible(&cand) {
                p = cand;
            }
        }
        // The feasible altitudes above a point need not be connected.
        let (lo, hi) = region.bounds;
        let n = opts.altitude_grid.max(2);
        let mut best = model.transformed(&p, &slack);
        for s in 0..=n {
            let h = lo + (hi - lo) * s as f64 / n as f64;
            let mut cand = Vec3::new(p.x, p.y, h);
            if !region.feasible(&cand) {
                // Slide along the boundary: nearest feasible point at that altitude.
                let Ok(Some(discs)) = region.discs(h) else { continue };
                let Ok(xy) = crate::numerics::project_discs(&p.xy(), &discs) else { continue };
                cand = Vec3::new(xy.x, xy.y, h);
            }
            if region.feasible(&cand) {
                let v = model.transformed(&cand, &slack);
                if v > best {
                    best = v;
                    p = cand;
                }
            }
        }
        slack = model.slack(&p);
        let next = model.value(&p);
        trace.push(next);
        let grew = next - val;
        val = next.max(val);
        if grew < opts.tol * val.abs().max(1e-300) {
            break;
        }
    }
    if opts.polish {
        let (lo, hi) = region.bounds;
        // Poll points outside the region are pulled back onto it at their altitude,
        // so the search can slide along active constraints.
        let pull = |x: &[f64; 3]| -> Option<Vec3> {
            if !(x[2] >= lo && x[2] <= hi) {
                return None;
            }
            let q = Vec3::new(x[0], x[1], x[2]);
            if region.feasible(&q) {
                return Some(q);
            }
            let discs = region.discs(x[2]).ok()??;
            let xy = crate::numerics::project_discs(&q.xy(), &discs).ok()?;
            let q = Vec3::new(xy.x, xy.y, x[2]);
            region.feasible(&q).then_some(q)
        };
        let f = |x: &[f64; 3]| pull(x).map(|q| model.value(&q));
        let (x, v) = pattern_search_max(f, [p.x, p.y, p.z], PatternOptions::default());
        if let Some(q) = pull(&x) {
            if v > model.value(&p) {
                p = q;
                trace.push(model.value(&p));
            }
        }
    }
    (p, trace)
}

/// Multi-start alternating placement. Never returns a worse point than a feasible `init`.
pub(crate) fn solve<M: RatioModel>(model: &M, init: &Vec3, uav: usize, opts: &PlacementOptions) -> Result<PlacementOutcome> {
    let region = model.region();
    let initial_value = if region.feasible(init) { model.value(init) } else { f64::NEG_INFINITY };
    let mut best: Option<(Vec3, f64, Vec<f64>)> = None;
    if region.feasible(init) {
        best = Some((*init, initial_value, vec![initial_value]));
    }
    for start in start_points(model, init, opts) {
        let Some(s) = make_feasible(model, &start) else { continue };
        let (p, trace) = run_start(model, s, opts);
        let v = model.value(&p);
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((p, v, trace));
        }
    }
    let (position, value, trace) = best.ok_or(Error::InfeasiblePlacement { uav })?;
    Ok(PlacementOutcome { position, value, initial_value, slack: model.slack(&position), trace })
}

