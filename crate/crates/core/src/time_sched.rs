//! Charging/collection time split and uplink epoch scheduling.
//!
//! With the schedule fixed, the sum throughput is concave in `(tau0, tau1)`
//! and increases along rays, so the optimum sits on `tau0 + tau1 = T`. Either
//! it is the stationary point of the one-dimensional restriction (every SNR
//! constraint slack), or the tightest SNR constraint pins `tau0` in closed form.

use serde::{Deserialize, Serialize};

use crate::channel::LinkGains;
use crate::error::{Error, Result};
use crate::model::{
    AssociationState, BinaryMatrix, Deployment, Scenario, Schedule, SolverCoefficients, TimeAllocation,
};
use crate::numerics::{bisect_root, hungarian};

/// How uplink devices are spread over epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulingPolicy {
    /// Maximize the per-epoch marginal benefit.
    Optimal,
    /// Innermost ring first.
    NearFirst,
    /// Outermost ring first.
    FarFirst,
}

/// Which side of the theorem produced a time allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeCase {
    /// Stationary point, all SNR constraints slack.
    Interior,
    /// The SNR constraint of `pair` is tight.
    Binding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSolution {
    pub time: TimeAllocation,
    pub case: TimeCase,
    /// Largest SNR ratio at `time`.
    pub varpi: f64,
    pub pair: (usize, usize),
}

/// A schedule together with the quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    pub schedule: Schedule,
    pub time: TimeAllocation,
    pub w: BinaryMatrix,
    /// `marginal_benefit[i][k-1]`.
    pub marginal_benefit: Vec<Vec<f64>>,
}

/// `ceil(C_j / M)` for every uplink UAV.
pub fn epoch_counts(assoc: &AssociationState, m: usize) -> Vec<usize> {
    assoc.collected_counts().iter().map(|c| c.div_ceil(m)).collect()
}

/// Coefficients at the current deployment; see [`coefficients_from_gains`].
pub fn compute_coefficients(
    scn: &Scenario,
    dep: &Deployment,
    assoc: &AssociationState,
    sched: &Schedule,
    time: TimeAllocation,
) -> Result<SolverCoefficients> {
    let gains = LinkGains::compute(&scn.devices, &dep.dl_positions, &dep.ul_positions, &scn.channel)?;
    coefficients_from_gains(scn, &gains, assoc, sched, time)
}

/// Per-device coefficients from a precomputed gain table.
pub fn coefficients_from_gains(
    scn: &Scenario,
    gains: &LinkGains,
    assoc: &AssociationState,
    sched: &Schedule,
    time: TimeAllocation,
) -> Result<SolverCoefficients> {
    let k_dev = scn.device_count();
    let gamma = scn.radio.gamma;
    let eps = scn.radio.epsilon();
    let t1 = time.tau1;
    if sched.epoch.len() != k_dev {
        return Err(Error::State("schedule does not cover every device".into()));
    }

    let mut c = SolverCoefficients {
        epsilon: vec![eps; k_dev],
        gamma,
        hover_time: scn.hover_time,
        time,
        epoch: sched.epoch.clone(),
        epochs: vec![0; k_dev],
        collector_gain: vec![0.0; k_dev],
        dl_gain_sum: vec![0.0; k_dev],
        ul_gain_sum: vec![0.0; k_dev],
        theta0: vec![0.0; k_dev],
        theta1: vec![0.0; k_dev],
        phi: vec![0.0; k_dev],
        gamma_cap: vec![0.0; k_dev],
        lambda_cap: vec![0.0; k_dev],
        omega_cap: vec![0.0; k_dev],
        iota: vec![0.0; k_dev],
        w: vec![Vec::new(); k_dev],
        varpi: f64::NEG_INFINITY,
        argmax_pair: (0, 0),
    };

    for i in 0..k_dev {
        let j = assoc.collector(i);
        let l = sched.epochs_per_uav[j];
        let k = sched.epoch[i];
        if k == 0 || k > l {
            return Err(Error::State(format!("device {i} scheduled at epoch {k} of {l}")));
        }
        let gu = gains.ul[i][j];
        let gd_sum: f64 = (0..scn.uav_count).filter(|&n| assoc.dl_energy[i][n]).map(|n| gains.dl[i][n]).sum();
        let gu_sum: f64 = (0..scn.uav_count).filter(|&n| assoc.ul_energy[i][n]).map(|n| gains.ul[i][n]).sum();
        let others: f64 = (0..scn.uav_count)
            .filter(|&n| n != j && assoc.ul_energy[i][n])
            .map(|n| gains.ul[i][n])
            .sum();
        if !(gu > 0.0 && gd_sum > 0.0 && gu_sum > 0.0) {
            return Err(Error::State(format!("device {i} has a zero-gain active link")));
        }
        c.epochs[i] = l;
        c.collector_gain[i] = gu;
        c.dl_gain_sum[i] = gd_sum;
        c.ul_gain_sum[i] = gu_sum;
        c.theta0[i] = eps * gu * gd_sum;
        c.theta1[i] = eps * gu * gu_sum;
        c.phi[i] = t1 / (eps * l as f64 * gu);
        c.lambda_cap[i] = t1 / (eps * l as f64 * gd_sum);
        c.iota[i] = eps * (k - 1) as f64 * others;

        let ratio = snr_ratio(c.theta0[i], c.theta1[i], l, k, gamma, time);
        if ratio > c.varpi {
            c.varpi = ratio;
            c.argmax_pair = (i, k);
        }
    }
    c.w = compute_w(&c, time);

    let (m, n) = c.argmax_pair;
    let slack = gamma - c.theta1[m] * (n - 1) as f64;
    let base = slack / (c.theta0[m] * c.epochs[m] as f64);
    for i in 0..k_dev {
        let scale = eps * c.epochs[i] as f64 * base;
        c.gamma_cap[i] = scale * c.collector_gain[i];
        c.omega_cap[i] = scale * c.dl_gain_sum[i];
    }
    Ok(c)
}

/// `tau1 gamma / (Theta0 L tau0 + Theta1 (k-1) tau1)`; at least 1 when the SNR constraint binds or fails.
pub fn snr_ratio(theta0: f64, theta1: f64, l: usize, k: usize, gamma: f64, time: TimeAllocation) -> f64 {
    time.tau1 * gamma / (theta0 * l as f64 * time.tau0 + theta1 * (k - 1) as f64 * time.tau1)
}

/// `w[i][k-1] = 1` iff the SNR constraint of device `i` at epoch `k` is not strictly slack.
pub fn compute_w(coeff: &SolverCoefficients, time: TimeAllocation) -> BinaryMatrix {
    (0..coeff.theta0.len())
        .map(|i| {
            let l = coeff.epochs[i];
            (1..=l)
                .map(|k| snr_ratio(coeff.theta0[i], coeff.theta1[i], l, k, coeff.gamma, time) >= 1.0)
                .collect()
        })
        .collect()
}

/// Largest SNR ratio over the scheduled (device, epoch) pairs and where it occurs.
pub fn compute_varpi(coeff: &SolverCoefficients, time: TimeAllocation, sched: &Schedule) -> Result<(f64, (usize, usize))> {
    let mut best: Option<(f64, (usize, usize))> = None;
    for (i, &k) in sched.epoch.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let r = snr_ratio(coeff.theta0[i], coeff.theta1[i], coeff.epochs[i], k, coeff.gamma, time);
        if best.is_none_or(|b| r > b.0) {
            best = Some((r, (i, k)));
        }
    }
    best.ok_or_else(|| Error::State("no scheduled device".into()))
}

/// Rate of device `i` at epoch `k`, nats/s/Hz.
pub fn rate(coeff: &SolverCoefficients, i: usize, k: usize, time: TimeAllocation) -> f64 {
    rate_with(coeff, i, coeff.epochs[i], k, time)
}

fn rate_with(coeff: &SolverCoefficients, i: usize, l: usize, k: usize, time: TimeAllocation) -> f64 {
    let snr = (coeff.theta0[i] * l as f64 * time.tau0 + coeff.theta1[i] * (k - 1) as f64 * time.tau1) / time.tau1;
    snr.ln_1p()
}

/// Value of device `i` in epoch `k` for the schedule selection.
pub fn marginal_benefit(coeff: &SolverCoefficients, time: TimeAllocation, i: usize, k: usize) -> f64 {
    benefit_with(coeff, time, i, coeff.epochs[i], k)
}

fn benefit_with(coeff: &SolverCoefficients, time: TimeAllocation, i: usize, l: usize, k: usize) -> f64 {
    let ratio = snr_ratio(coeff.theta0[i], coeff.theta1[i], l, k, coeff.gamma, time);
    let penalty = if ratio >= 1.0 { ratio } else { 0.0 };
    time.tau1 / l as f64 * rate_with(coeff, i, l, k, time) - penalty
}

/// Sum throughput `Σ (tau1/L) R` of a schedule, ignoring the SNR threshold.
pub fn schedule_objective(coeff: &SolverCoefficients, sched: &Schedule, time: TimeAllocation) -> f64 {
    sched
        .epoch
        .iter()
        .enumerate()
        .map(|(i, &k)| time.tau1 / coeff.epochs[i] as f64 * rate(coeff, i, k, time))
        .sum()
}

/// Sum of marginal benefits of a schedule.
pub fn schedule_benefit(coeff: &SolverCoefficients, sched: &Schedule, time: TimeAllocation) -> f64 {
    sched.epoch.iter().enumerate().map(|(i, &k)| marginal_benefit(coeff, time, i, k)).sum()
}

/// Schedule maximizing the summed marginal benefit, per UAV, as an exact slot assignment.
pub fn build_schedule(
    coeff: &SolverCoefficients,
    time: TimeAllocation,
    m: usize,
    assoc: &AssociationState,
) -> Result<Schedule> {
    if m == 0 {
        return Err(Error::Parameter("channel count must be at least 1".into()));
    }
    let epochs = epoch_counts(assoc, m);
    let mut epoch = vec![0; assoc.device_count()];
    for (j, &l) in epochs.iter().enumerate() {
        let members = assoc.collected_by(j);
        if members.is_empty() {
            continue;
        }
        let slots = l * m;
        let cost: Vec<Vec<f64>> = members
            .iter()
            .map(|&i| (0..slots).map(|s| -benefit_with(coeff, time, i, l, s / m + 1)).collect())
            .collect();
        let a = hungarian(&cost)?;
        for (r, &i) in members.iter().enumerate() {
            let s = a.row_to_col[r].ok_or_else(|| Error::Invariant("device left unscheduled".into()))?;
            epoch[i] = s / m + 1;
        }
    }
    Ok(Schedule { epoch, epochs_per_uav: epochs })
}

/// Order in which [`greedy_schedule`] fills epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillOrder {
    /// From the last epoch back to the first.
    Backward,
    /// From the first epoch forward.
    Forward,
}

/// Epoch-by-epoch top-M selection of the largest marginal benefits.
pub fn greedy_schedule(
    coeff: &SolverCoefficients,
    time: TimeAllocation,
    m: usize,
    assoc: &AssociationState,
    order: FillOrder,
) -> Result<Schedule> {
    if m == 0 {
        return Err(Error::Parameter("channel count must be at least 1".into()));
    }
    let epochs = epoch_counts(assoc, m);
    let mut epoch = vec![0; assoc.device_count()];
    for (j, &l) in epochs.iter().enumerate() {
        let mut left = assoc.collected_by(j);
        let ks: Vec<usize> = match order {
            FillOrder::Backward => (1..=l).rev().collect(),
            FillOrder::Forward => (1..=l).collect(),
        };
        for &k in &ks {
            let mut scored: Vec<(f64, usize)> =
                left.iter().map(|&i| (benefit_with(coeff, time, i, l, k), i)).collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let chosen: Vec<usize> = scored.iter().take(m).map(|s| s.1).collect();
            for &i in &chosen {
                epoch[i] = k;
            }
            left.retain(|i| !chosen.contains(i));
        }
        if !left.is_empty() {
            return Err(Error::Invariant("greedy fill left devices unscheduled".into()));
        }
    }
    Ok(Schedule { epoch, epochs_per_uav: epochs })
}

/// [`build_schedule`] plus the penalty indicators and benefits it used.
pub fn build_epoch_plan(
    coeff: &SolverCoefficients,
    time: TimeAllocation,
    m: usize,
    assoc: &AssociationState,
) -> Result<EpochPlan> {
    let schedule = build_schedule(coeff, time, m, assoc)?;
    let marginal_benefit = (0..coeff.theta0.len())
        .map(|i| (1..=coeff.epochs[i]).map(|k| marginal_benefit(coeff, time, i, k)).collect())
        .collect();
    Ok(EpochPlan { schedule, time, w: compute_w(coeff, time), marginal_benefit })
}

/// Optimal `(tau0, tau1)` for a fixed schedule.
pub fn optimal_time(coeff: &SolverCoefficients, sched: &Schedule) -> Result<TimeSolution> {
    let t = coeff.hover_time;
    let gamma = coeff.gamma;
    let terms: Vec<(f64, f64, f64)> = sched
        .epoch
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            (coeff.theta0[i], coeff.theta1[i] * (k - 1) as f64, coeff.epochs[i] as f64)
        })
        .collect();
    if terms.is_empty() {
        return Err(Error::State("no scheduled device".into()));
    }

    // Smallest tau0 meeting each SNR constraint on the line tau0 + tau1 = T.
    let mut t_max = f64::NEG_INFINITY;
    let mut pair = (0, 0);
    for (i, &(th0, c, l)) in terms.iter().enumerate() {
        let need = gamma - c;
        let ti = if need > 0.0 { t * need / (need + th0 * l) } else { 0.0 };
        if ti > t_max {
            t_max = ti;
            pair = (i, sched.epoch[i]);
        }
    }

    let lo = 1e-6 * t;
    let hi = (1.0 - 1e-6) * t;
    let slope = |tau0: f64| -> f64 {
        let tau1 = t - tau0;
        terms
            .iter()
            .map(|&(th0, c, l)| {
                let d = th0 * l * tau0 + (1.0 + c) * tau1;
                let r = ((th0 * l * tau0 + c * tau1) / tau1).ln_1p();
                th0 * t / d - r / l
            })
            .sum()
    };
    let root = match bisect_root(slope, lo, hi, 1e-14 * t) {
        Ok(r) => Some(r),
        Err(Error::Bracket { .. }) => None,
        Err(e) => return Err(e),
    };

    let (time, case) = match root {
        Some(r) if r >= t_max => (TimeAllocation { tau0: r, tau1: t - r }, TimeCase::Interior),
        _ if t_max > lo => {
            let (th0, c, l) = terms[pair.0];
            let need = gamma - c;
            let den = need + th0 * l;
            (TimeAllocation { tau0: t * need / den, tau1: t * th0 * l / den }, TimeCase::Binding)
        }
        _ => {
            return Err(Error::TimeAllocation(format!(
                "no stationary point on ({lo}, {hi}): slope at lo = {:e}, at hi = {:e}",
                slope(lo),
                slope(hi)
            )))
        }
    };
    let (varpi, argmax) = compute_varpi(coeff, time, sched)?;
    let pair = if case == TimeCase::Binding { pair } else { argmax };
    Ok(TimeSolution { time, case, varpi, pair })
}

/// Grid search of the same problem, for verification.
pub fn scan_time(coeff: &SolverCoefficients, sched: &Schedule, step: f64) -> Option<TimeAllocation> {
    let t = coeff.hover_time;
    let n = (t / step).round() as usize;
    let mut best: Option<(f64, TimeAllocation)> = None;
    for s in 1..n {
        let tau0 = t * s as f64 / n as f64;
        let time = TimeAllocation { tau0, tau1: t - tau0 };
        let feasible = compute_varpi(coeff, time, sched).is_ok_and(|(v, _)| v <= 1.0);
        if !feasible {
            continue;
        }
        let v = schedule_objective(coeff, sched, time);
        if best.is_none_or(|b| v > b.0) {
            best = Some((v, time));
        }
    }
    best.map(|b| b.1)
}

/// Ring-based near-first / far-first schedule around each uplink UAV.
pub fn heuristic_schedule(
    policy: SchedulingPolicy,
    scn: &Scenario,
    dep: &Deployment,
    assoc: &AssociationState,
    m: usize,
) -> Result<Schedule> {
    if m == 0 {
        return Err(Error::Parameter("channel count must be at least 1".into()));
    }
    let epochs = epoch_counts(assoc, m);
    let mut epoch = vec![0; assoc.device_count()];
    for (j, &l) in epochs.iter().enumerate() {
        let u = dep.ul_positions[j];
        let mut members: Vec<(f64, usize)> = assoc
            .collected_by(j)
            .into_iter()
            .map(|i| {
                let s = scn.devices[i];
                ((u.x - s.x).hypot(u.y - s.y), i)
            })
            .collect();
        // Farthest first; equal distances in ascending index order.
        members.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (pos, &(_, i)) in members.iter().enumerate() {
            let ring = pos / m + 1;
            epoch[i] = match policy {
                SchedulingPolicy::FarFirst => ring,
                SchedulingPolicy::NearFirst => l + 1 - ring,
                SchedulingPolicy::Optimal => {
                    return Err(Error::Parameter("heuristic_schedule needs NF or FF".into()))
                }
            };
        }
    }
    Ok(Schedule { epoch, epochs_per_uav: epochs })
}
