//! Throughput evaluation, fairness, constraint checking and the baselines.

use serde::{Deserialize, Serialize};

use crate::channel::gain_between;
use crate::error::{Error, Result};
use crate::model::{
    AssociationState, ConstraintDiagnostics, Deployment, Scenario, Schedule, SolutionReport, TimeAllocation, Vec3,
};
use crate::time_sched::{build_schedule, compute_coefficients};

/// Relative slack allowed on threshold comparisons.
pub const THRESHOLD_TOL: f64 = 1e-9;

/// Four fixed base stations covering the service disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsLayout {
    pub positions: Vec<Vec3>,
    pub coverage_radius: f64,
}

pub const BS_HEIGHT: f64 = 40.0;

/// Stations at `(±R/2, ±R/2, 40 m)`, each covering a disc of radius `R √2 / 2`.
pub fn bs_layout(region_radius: f64) -> Result<BsLayout> {
    if !(region_radius > 0.0 && region_radius.is_finite()) {
        return Err(Error::Parameter(format!("region radius must be positive, got {region_radius}")));
    }
    let h = region_radius / 2.0;
    let positions = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .iter()
        .map(|&(sx, sy)| Vec3::new(sx * h, sy * h, BS_HEIGHT))
        .collect();
    Ok(BsLayout { positions, coverage_radius: region_radius * std::f64::consts::FRAC_1_SQRT_2 })
}

impl BsLayout {
    /// Whether a ground point lies in at least one station's disc.
    pub fn covers(&self, x: f64, y: f64) -> bool {
        self.positions
            .iter()
            .any(|p| (p.x - x).hypot(p.y - y) <= self.coverage_radius * (1.0 + 1e-12))
    }
}

/// `(Σx)^2 / (n Σx^2)`.
pub fn jain(throughputs: &[f64]) -> Result<f64> {
    if throughputs.is_empty() {
        return Err(Error::Parameter("fairness of an empty vector".into()));
    }
    let s: f64 = throughputs.iter().sum();
    let s2: f64 = throughputs.iter().map(|x| x * x).sum();
    if s2 == 0.0 {
        return Err(Error::UndefinedFairness);
    }
    Ok(s * s / (throughputs.len() as f64 * s2))
}

/// Energy, SNR and rate of one device, straight from the system model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceLink {
    /// Energy harvested while charging, J.
    pub dl_energy: f64,
    /// Energy harvested from earlier uplink epochs, J.
    pub ul_energy: f64,
    pub snr: f64,
    pub rate: f64,
    pub throughput: f64,
}

/// Evaluates device `i` with gains computed from the positions.
pub fn device_link(
    scn: &Scenario,
    dep: &Deployment,
    assoc: &AssociationState,
    sched: &Schedule,
    time: TimeAllocation,
    i: usize,
) -> Result<DeviceLink> {
    let r = &scn.radio;
    let s = &scn.devices[i];
    let n = scn.uav_count;
    let j = assoc.collector(i);
    let l = sched.epochs_per_uav[j] as f64;
    let k = sched.epoch[i] as f64;
    let mut dl_gain = 0.0;
    let mut ul_gain = 0.0;
    for m in 0..n {
        if assoc.dl_energy[i][m] {
            dl_gain += gain_between(&dep.dl_positions[m], s, &scn.channel)?;
        }
        if assoc.ul_energy[i][m] {
            ul_gain += gain_between(&dep.ul_positions[m], s, &scn.channel)?;
        }
    }
    let dl_energy = r.eh_eff * r.p_ut * time.tau0 * dl_gain;
    let ul_energy = r.eh_eff * r.p_ut * (k - 1.0) * time.tau1 / l * ul_gain;
    let g = gain_between(&dep.ul_positions[j], s, &scn.channel)?;
    let slot = time.tau1 / l;
    let snr = g * (dl_energy + ul_energy) / (slot * r.noise_power);
    let rate = snr.ln_1p();
    let throughput = if snr >= r.gamma * (1.0 - THRESHOLD_TOL) { slot * rate } else { 0.0 };
    Ok(DeviceLink { dl_energy, ul_energy, snr, rate, throughput })
}

/// Checks every constraint of the joint problem directly on the solution.
pub fn check_constraints(
    scn: &Scenario,
    dep: &Deployment,
    assoc: &AssociationState,
    sched: &Schedule,
    time: TimeAllocation,
) -> ConstraintDiagnostics {
    let k_dev = scn.device_count();
    let n = scn.uav_count;
    let mut d = ConstraintDiagnostics {
        associations_valid: assoc.validate(k_dev, n).is_ok(),
        schedule_valid: false,
        time_valid: time.validate(scn.hover_time).is_ok(),
        altitudes_valid: dep.validate(scn).is_ok(),
        ..Default::default()
    };
    if !d.associations_valid {
        return d;
    }
    d.schedule_valid = sched.validate(assoc, scn.channel_count).is_ok();
    let r = &scn.radio;
    for i in 0..k_dev {
        for j in 0..n {
            let s = &scn.devices[i];
            if assoc.dl_energy[i][j] {
                let g = gain_between(&dep.dl_positions[j], s, &scn.channel).unwrap_or(0.0);
                if r.p_ut * g < r.rho * (1.0 - THRESHOLD_TOL) {
                    d.dl_energy_violations.push((i, j));
                }
            }
            if assoc.ul_energy[i][j] {
                let g = gain_between(&dep.ul_positions[j], s, &scn.channel).unwrap_or(0.0);
                if r.p_ut * g < r.rho * (1.0 - THRESHOLD_TOL) {
                    d.ul_energy_violations.push((i, j));
                }
            }
        }
        if d.schedule_valid {
            match device_link(scn, dep, assoc, sched, time, i) {
                Ok(link) if link.snr >= r.gamma * (1.0 - THRESHOLD_TOL) => {}
                _ => d.snr_violations.push(i),
            }
        }
    }
    d
}

/// Rates and throughputs of a complete solution.
///
/// Devices below the SNR threshold cannot be decoded and contribute zero
/// throughput; they are listed in the diagnostics.
pub fn throughput_report(
    scn: &Scenario,
    dep: &Deployment,
    assoc: &AssociationState,
    sched: &Schedule,
    time: TimeAllocation,
) -> Result<SolutionReport> {
    assoc.validate(scn.device_count(), scn.uav_count)?;
    sched.validate(assoc, scn.channel_count)?;
    let links = (0..scn.device_count())
        .map(|i| device_link(scn, dep, assoc, sched, time, i))
        .collect::<Result<Vec<_>>>()?;
    let per_device_rate: Vec<f64> = links.iter().map(|l| l.rate).collect();
    let per_device_throughput: Vec<f64> = links.iter().map(|l| l.throughput).collect();
    let sum_throughput = per_device_throughput.iter().sum();
    Ok(SolutionReport {
        jain: jain(&per_device_throughput).ok(),
        per_device_rate,
        per_device_throughput,
        sum_throughput,
        trace: Vec::new(),
        feasibility: check_constraints(scn, dep, assoc, sched, time),
    })
}

/// Same state with one device per epoch: `L = C` epochs of length `tau1 / C` per UAV.
pub fn tdma_mode(
    scn: &Scenario,
    dep: &Deployment,
    assoc: &AssociationState,
    time: TimeAllocation,
) -> Result<SolutionReport> {
    let single = Scenario { channel_count: 1, ..scn.clone() };
    let epochs = crate::time_sched::epoch_counts(assoc, 1);
    // Order within each UAV by the marginal benefit at the given time split.
    let provisional = Schedule {
        epoch: (0..scn.device_count()).map(|_| 1).collect(),
        epochs_per_uav: epochs.clone(),
    };
    let coeff = compute_coefficients(&single, dep, assoc, &provisional, time)?;
    let sched = build_schedule(&coeff, time, 1, assoc)?;
    throughput_report(&single, dep, assoc, &sched, time)
}
