//! The outer alternating loop: schedule and time split, downlink association and
//! placement, uplink association and placement, until the sum throughput stops growing.
//!
//! Every block produces a candidate state. The candidate is scored by its true
//! sum throughput with the time split re-optimized (or held at one half in the
//! equal-time mode) and is kept only if that score does not drop, so the
//! recorded trace is nondecreasing.

use serde::{Deserialize, Serialize};

use crate::channel::{energy_limit, horizontal_reach, LinkGains};
use crate::dl_opt::{dl_associate, dl_place_all};
use crate::error::{Error, Result};
use crate::metrics::{bs_layout, throughput_report, THRESHOLD_TOL};
use crate::model::{
    AssociationState, Deployment, Scenario, Schedule, SnrRegime, SolutionReport, SolverCoefficients, TimeAllocation,
    Vec2, Vec3,
};
use crate::placement::PlacementOptions;
use crate::time_sched::{
    build_schedule, coefficients_from_gains, heuristic_schedule, optimal_time, SchedulingPolicy,
};
use crate::ul_opt::{ul_energy_associate, ul_info_associate, ul_place_all, InfoAssignment};

pub use crate::time_sched::compute_varpi;

/// How the charging/collection split is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeMode {
    /// Optimal split for the current schedule.
    Optimal,
    /// Half of the block each.
    Equal,
}

/// Who serves the devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Infrastructure {
    /// The UAV swarm, placed by the optimizer.
    Uav,
    /// Four fixed stations at 40 m covering the region.
    FixedBs,
}

/// Uplink multiple access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Access {
    /// `M` subcarriers per epoch.
    Ofdma,
    /// One device per epoch.
    Tdma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Stop when the relative growth of the sum throughput falls below this.
    pub eps: f64,
    pub max_iters: usize,
    pub policy: SchedulingPolicy,
    pub time_mode: TimeMode,
    pub infra: Infrastructure,
    pub access: Access,
    /// Starting altitude of both phases, meters.
    pub init_altitude: f64,
    pub info_assignment: InfoAssignment,
    /// Try moving single devices to another collector after the uplink association step.
    /// Only the optimal scheduler uses these moves; the NF and FF baselines run the plain blocks.
    pub collector_moves: bool,
    pub placement: PlacementOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            eps: 1e-4,
            max_iters: 50,
            policy: SchedulingPolicy::Optimal,
            time_mode: TimeMode::Optimal,
            infra: Infrastructure::Uav,
            access: Access::Ofdma,
            init_altitude: 40.0,
            info_assignment: InfoAssignment::PerDevice,
            collector_moves: true,
            placement: PlacementOptions::default(),
        }
    }
}

/// Everything the loop carries between iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub iteration: usize,
    /// The scenario actually optimized (TDMA forces one subcarrier, fixed stations force four servers).
    pub scenario: Scenario,
    pub deployment: Deployment,
    pub associations: AssociationState,
    pub schedule: Schedule,
    pub time: TimeAllocation,
    pub coefficients: SolverCoefficients,
    pub trace: Vec<f64>,
    /// Sum throughput of the current state.
    pub value: f64,
}

/// Output of [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub report: SolutionReport,
    pub state: RunState,
    pub iterations: usize,
    pub converged: bool,
    /// Value before the first iteration.
    pub initial_value: f64,
}

impl RunResult {
    pub fn mean_dl_altitude(&self) -> f64 {
        mean(self.state.deployment.dl_positions.iter().map(|p| p.z))
    }

    pub fn mean_ul_altitude(&self) -> f64 {
        mean(self.state.deployment.ul_positions.iter().map(|p| p.z))
    }

    /// Mean horizontal radius of the ground disc each downlink UAV can charge.
    pub fn mean_coverage_radius(&self) -> f64 {
        let scn = &self.state.scenario;
        let limit = energy_limit(scn.radio.p_ut, scn.radio.rho, &scn.channel);
        mean(
            self.state
                .deployment
                .dl_positions
                .iter()
                .map(|p| horizontal_reach(limit, p.z, &scn.channel).unwrap_or(0.0)),
        )
    }

    /// Mean horizontal distance of the downlink UAVs from their centroid.
    pub fn dl_spread(&self) -> f64 {
        let ps = &self.state.deployment.dl_positions;
        let cx = mean(ps.iter().map(|p| p.x));
        let cy = mean(ps.iter().map(|p| p.y));
        mean(ps.iter().map(|p| (p.x - cx).hypot(p.y - cy)))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// A fully evaluated state.
#[derive(Debug, Clone)]
struct Eval {
    dep: Deployment,
    assoc: AssociationState,
    sched: Schedule,
    time: TimeAllocation,
    coeff: SolverCoefficients,
    gains: LinkGains,
    value: f64,
}

struct Runner<'a> {
    scn: &'a Scenario,
    opts: &'a RunOptions,
}

impl Runner<'_> {
    fn m(&self) -> usize {
        self.scn.channel_count
    }

    fn evaluate(&self, dep: Deployment, assoc: AssociationState, sched: Schedule) -> Result<Eval> {
        let scn = self.scn;
        let gains = LinkGains::compute(&scn.devices, &dep.dl_positions, &dep.ul_positions, &scn.channel)?;
        let t = scn.hover_time;
        let time = match self.opts.time_mode {
            TimeMode::Equal => TimeAllocation { tau0: 0.5 * t, tau1: 0.5 * t },
            TimeMode::Optimal => {
                let c = coefficients_from_gains(scn, &gains, &assoc, &sched, TimeAllocation { tau0: 0.5 * t, tau1: 0.5 * t })?;
                optimal_time(&c, &sched)?.time
            }
        };
        let coeff = coefficients_from_gains(scn, &gains, &assoc, &sched, time)?;
        let value = decodable_throughput(&coeff, &sched, time);
        Ok(Eval { dep, assoc, sched, time, coeff, gains, value })
    }

    /// Schedule for the given associations under the configured policy.
    fn schedule_for(&self, dep: &Deployment, assoc: &AssociationState, hint: Option<&Eval>) -> Result<Schedule> {
        let near = heuristic_schedule(SchedulingPolicy::NearFirst, self.scn, dep, assoc, self.m())?;
        match self.opts.policy {
            SchedulingPolicy::NearFirst => Ok(near),
            SchedulingPolicy::FarFirst => heuristic_schedule(SchedulingPolicy::FarFirst, self.scn, dep, assoc, self.m()),
            SchedulingPolicy::Optimal => {
                let half = 0.5 * self.scn.hover_time;
                let time = hint.map_or(TimeAllocation { tau0: half, tau1: half }, |e| e.time);
                let gains = LinkGains::compute(&self.scn.devices, &dep.dl_positions, &dep.ul_positions, &self.scn.channel)?;
                let c = coefficients_from_gains(self.scn, &gains, assoc, &near, time)?;
                build_schedule(&c, time, self.m(), assoc)
            }
        }
    }

    fn heuristic(&self) -> bool {
        self.opts.policy != SchedulingPolicy::Optimal
    }

    /// Replaces `cur` when `cand` scores at least as high.
    fn offer(&self, cur: &mut Eval, cand: Result<Eval>) -> bool {
        match cand {
            Ok(c) if c.value >= cur.value => {
                *cur = c;
                true
            }
            _ => false,
        }
    }

    fn iterate(&self, cur: &mut Eval) -> Result<()> {
        let scn = self.scn;
        let movable = self.opts.infra == Infrastructure::Uav;

        // Schedule and time split.
        let sched = match self.opts.policy {
            SchedulingPolicy::Optimal => build_schedule(&cur.coeff, cur.time, self.m(), &cur.assoc)?,
            p => heuristic_schedule(p, scn, &cur.dep, &cur.assoc, self.m())?,
        };
        let cand = self.evaluate(cur.dep.clone(), cur.assoc.clone(), sched);
        self.offer(cur, cand);
        let regime = cur.coeff.regime();

        // Downlink association.
        if let Ok(rows) = dl_associate(scn, &cur.gains, &cur.coeff, regime) {
            let assoc = AssociationState { dl_energy: rows, ..cur.assoc.clone() };
            let cand = self.evaluate(cur.dep.clone(), assoc, cur.sched.clone());
            self.offer(cur, cand);
        }

        // Downlink placement.
        if movable {
            let regime = cur.coeff.regime();
            let outcomes = dl_place_all(scn, &cur.assoc, &cur.coeff, regime, &cur.dep.dl_positions, &self.opts.placement);
            let apply = |dep: &mut Deployment, j: usize, o: &crate::placement::PlacementOutcome, assoc: &AssociationState| {
                dep.dl_positions[j] = o.position;
                let served = assoc.charged_by(j);
                for row in dep.dl_slack.iter_mut() {
                    row[j] = 0.0;
                }
                for (i, s) in served.iter().zip(&o.slack) {
                    dep.dl_slack[*i][j] = *s;
                }
            };
            let mut all = cur.dep.clone();
            for (j, o) in outcomes.iter().enumerate() {
                if let Ok(o) = o {
                    apply(&mut all, j, o, &cur.assoc);
                }
            }
            let cand = self.evaluate(all, cur.assoc.clone(), cur.sched.clone());
            if !self.offer(cur, cand) {
                for (j, o) in outcomes.iter().enumerate() {
                    if let Ok(o) = o {
                        let mut dep = cur.dep.clone();
                        apply(&mut dep, j, o, &cur.assoc);
                        let cand = self.evaluate(dep, cur.assoc.clone(), cur.sched.clone());
                        self.offer(cur, cand);
                    }
                }
            }
        }

        // Uplink energy association.
        let regime = cur.coeff.regime();
        if let Ok(rows) = ul_energy_associate(scn, &cur.gains, &cur.coeff, regime, &cur.assoc.ul_info) {
            let assoc = AssociationState { ul_energy: rows, ..cur.assoc.clone() };
            let cand = self.evaluate(cur.dep.clone(), assoc, cur.sched.clone());
            self.offer(cur, cand);
        }

        // Uplink information association; the schedule follows the new epoch counts.
        let regime = cur.coeff.regime();
        if let Ok((rows, _)) =
            ul_info_associate(scn, &cur.gains, &cur.coeff, regime, &cur.sched, self.opts.info_assignment)
        {
            if rows != cur.assoc.ul_info {
                let assoc = AssociationState { ul_info: rows, ..cur.assoc.clone() };
                let cand = self
                    .schedule_for(&cur.dep, &assoc, Some(cur))
                    .and_then(|s| self.evaluate(cur.dep.clone(), assoc, s));
                self.offer(cur, cand);
            }
        }
        // Single-device collector moves catch epoch-count savings the per-device scores cannot see.
        let n = scn.uav_count;
        let movers = if self.opts.collector_moves && !self.heuristic() { scn.device_count() } else { 0 };
        for i in 0..movers {
            let from = cur.assoc.collector(i);
            for j in (0..n).filter(|&j| j != from) {
                let mut assoc = cur.assoc.clone();
                assoc.ul_info[i][from] = false;
                assoc.ul_info[i][j] = true;
                let cand = self
                    .schedule_for(&cur.dep, &assoc, Some(cur))
                    .and_then(|s| self.evaluate(cur.dep.clone(), assoc, s));
                if matches!(&cand, Ok(c) if c.value > cur.value) {
                    self.offer(cur, cand);
                    break;
                }
            }
        }

        // Uplink placement.
        if movable {
            let regime = cur.coeff.regime();
            let outcomes = ul_place_all(
                scn,
                &cur.gains,
                &cur.assoc,
                &cur.coeff,
                regime,
                &cur.dep.ul_positions,
                &self.opts.placement,
            );
            let apply = |dep: &mut Deployment, j: usize, o: &crate::placement::PlacementOutcome, assoc: &AssociationState| {
                dep.ul_positions[j] = o.position;
                for row in dep.ul_slack.iter_mut() {
                    row[j] = 0.0;
                }
                for (i, s) in assoc.collected_by(j).iter().zip(&o.slack) {
                    dep.ul_slack[*i][j] = *s;
                }
            };
            let (assoc0, sched0) = (cur.assoc.clone(), cur.sched.clone());
            let build = |dep: Deployment| -> Result<Eval> {
                let sched = if self.heuristic() {
                    self.schedule_for(&dep, &assoc0, None)?
                } else {
                    sched0.clone()
                };
                self.evaluate(dep, assoc0.clone(), sched)
            };
            let mut all = cur.dep.clone();
            for (j, o) in outcomes.iter().enumerate() {
                if let Ok(o) = o {
                    apply(&mut all, j, o, &assoc0);
                }
            }
            let cand = build(all);
            if !self.offer(cur, cand) {
                for (j, o) in outcomes.iter().enumerate() {
                    if let Ok(o) = o {
                        let mut dep = cur.dep.clone();
                        apply(&mut dep, j, o, &assoc0);
                        let cand = build(dep);
                        self.offer(cur, cand);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sum over devices of `(tau1/L) ln(1 + SNR)`, counting only devices that meet the SNR threshold.
pub fn decodable_throughput(coeff: &SolverCoefficients, sched: &Schedule, time: TimeAllocation) -> f64 {
    sched
        .epoch
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let l = coeff.epochs[i] as f64;
            let snr = (coeff.theta0[i] * l * time.tau0 + coeff.theta1[i] * (k - 1) as f64 * time.tau1) / time.tau1;
            if snr >= coeff.gamma * (1.0 - THRESHOLD_TOL) {
                time.tau1 / l * snr.ln_1p()
            } else {
                0.0
            }
        })
        .sum()
}

/// The scenario the loop actually optimizes under the given options.
pub fn effective_scenario(scn: &Scenario, opts: &RunOptions) -> Scenario {
    let mut s = scn.clone();
    if opts.access == Access::Tdma {
        s.channel_count = 1;
    }
    if opts.infra == Infrastructure::FixedBs {
        s.uav_count = 4;
    }
    s
}

/// Starting deployment: k-means centroids seeded by an angular partition of the devices.
pub fn initial_positions(scn: &Scenario, altitude: f64) -> Vec<Vec3> {
    let n = scn.uav_count;
    let mut order: Vec<(f64, usize)> = scn.devices.iter().enumerate().map(|(i, p)| (p.y.atan2(p.x), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = order.len();
    let mut label = vec![0usize; k];
    for j in 0..n {
        for &(_, i) in &order[j * k / n..(j + 1) * k / n] {
            label[i] = j;
        }
    }
    let all = scn.devices.iter().fold(Vec2::zeros(), |a, p| a + p) / k as f64;
    let centroids = |label: &[usize]| -> Vec<Vec2> {
        (0..n)
            .map(|j| {
                let (sum, cnt) = scn
                    .devices
                    .iter()
                    .zip(label)
                    .filter(|(_, &l)| l == j)
                    .fold((Vec2::zeros(), 0usize), |(s, c), (p, _)| (s + p, c + 1));
                if cnt == 0 {
                    all
                } else {
                    sum / cnt as f64
                }
            })
            .collect()
    };
    let mut centers = centroids(&label);
    for _ in 0..100 {
        let next: Vec<usize> = scn
            .devices
            .iter()
            .map(|p| {
                (0..n)
                    .min_by(|&a, &b| (centers[a] - p).norm().total_cmp(&(centers[b] - p).norm()).then(a.cmp(&b)))
                    .unwrap_or(0)
            })
            .collect();
        if next == label {
            break;
        }
        label = next;
        centers = centroids(&label);
    }
    centers.iter().map(|c| Vec3::new(c.x, c.y, altitude)).collect()
}

fn feasible_rows(scn: &Scenario, gains: &[Vec<f64>]) -> Vec<Vec<bool>> {
    gains
        .iter()
        .map(|row| row.iter().map(|g| scn.radio.p_ut * g >= scn.radio.rho).collect())
        .collect()
}

/// Initial state: angular centroids, energy rows from the threshold, nearest collector,
/// equal time split and a near-first schedule.
pub fn initial_state(scn: &Scenario, opts: &RunOptions) -> Result<(Deployment, AssociationState, Schedule)> {
    let (lo, hi) = scn.altitude_bounds;
    let mut positions = match opts.infra {
        Infrastructure::Uav => initial_positions(scn, opts.init_altitude.clamp(lo, hi)),
        Infrastructure::FixedBs => bs_layout(scn.region_radius)?.positions,
    };
    let mut gains = LinkGains::compute(&scn.devices, &positions, &positions, &scn.channel)?;
    let mut rows = feasible_rows(scn, &gains.dl);
    let uncovered = |rows: &Vec<Vec<bool>>| rows.iter().position(|r| !r.iter().any(|&x| x));
    if uncovered(&rows).is_some() && opts.infra == Infrastructure::Uav {
        // Lift every UAV to the altitude with the widest charging disc.
        let limit = energy_limit(scn.radio.p_ut, scn.radio.rho, &scn.channel);
        let best = (0..=200)
            .map(|s| lo + (hi - lo) * s as f64 / 200.0)
            .map(|h| (h, horizontal_reach(limit, h, &scn.channel).unwrap_or(-1.0)))
            .fold((lo, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        for p in positions.iter_mut() {
            p.z = best.0;
        }
        gains = LinkGains::compute(&scn.devices, &positions, &positions, &scn.channel)?;
        rows = feasible_rows(scn, &gains.dl);
    }
    if let Some(i) = uncovered(&rows) {
        return Err(Error::Coverage { device: i });
    }
    let n = positions.len();
    let ul_info = scn
        .devices
        .iter()
        .map(|s| {
            let best = (0..n)
                .min_by(|&a, &b| {
                    let da = (positions[a].x - s.x).hypot(positions[a].y - s.y);
                    let db = (positions[b].x - s.x).hypot(positions[b].y - s.y);
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .unwrap_or(0);
            (0..n).map(|j| j == best).collect()
        })
        .collect();
    let assoc = AssociationState { dl_energy: rows.clone(), ul_info, ul_energy: rows };
    let dep = Deployment::new(positions.clone(), positions, scn.device_count());
    let sched = heuristic_schedule(SchedulingPolicy::NearFirst, scn, &dep, &assoc, scn.channel_count)?;
    Ok((dep, assoc, sched))
}

/// Runs the alternating optimization to convergence.
pub fn run(scn: &Scenario, opts: &RunOptions) -> Result<RunResult> {
    scn.validate()?;
    let scn = effective_scenario(scn, opts);
    let (dep, assoc, sched) = initial_state(&scn, opts)?;
    run_from(&scn, opts, dep, assoc, sched)
}

/// Runs the loop from a given state of the effective scenario.
pub fn run_from(
    scn: &Scenario,
    opts: &RunOptions,
    dep: Deployment,
    assoc: AssociationState,
    sched: Schedule,
) -> Result<RunResult> {
    let runner = Runner { scn, opts };
    let sched = if opts.policy == SchedulingPolicy::Optimal { sched } else { runner.schedule_for(&dep, &assoc, None)? };
    let mut cur = runner.evaluate(dep, assoc, sched).map_err(|e| e.at_iteration(0))?;
    let initial_value = cur.value;
    let mut trace = Vec::new();
    let mut prev = cur.value;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iters {
        runner.iterate(&mut cur).map_err(|e| e.at_iteration(it))?;
        iterations = it;
        if cur.value < prev * (1.0 - 1e-9) - 1e-300 {
            return Err(Error::Invariant(format!("sum throughput dropped from {prev} to {} at iteration {it}", cur.value)));
        }
        trace.push(cur.value);
        let growth = cur.value - prev;
        prev = cur.value;
        if growth <= opts.eps * cur.value.abs() {
            converged = true;
            break;
        }
    }

    let mut report = throughput_report(scn, &cur.dep, &cur.assoc, &cur.sched, cur.time)?;
    let gap = (report.sum_throughput - cur.value).abs();
    if gap > 1e-6 * cur.value.abs().max(1e-300) {
        return Err(Error::Invariant(format!(
            "report throughput {} differs from loop value {}",
            report.sum_throughput, cur.value
        )));
    }
    report.trace = trace.clone();
    let state = RunState {
        iteration: iterations,
        scenario: scn.clone(),
        deployment: cur.dep,
        associations: cur.assoc,
        schedule: cur.sched,
        time: cur.time,
        coefficients: cur.coeff,
        trace,
        value: cur.value,
    };
    Ok(RunResult { report, state, iterations, converged, initial_value })
}

/// Regime of a state, for callers that only hold a report.
pub fn regime_of(state: &RunState) -> SnrRegime {
    state.coefficients.regime()
}
