#![allow(dead_code)]

pub mod checks;
pub mod oracle;

use uavdeploy::model::*;
use uavdeploy::time_sched::{compute_varpi, compute_w};

/// Coefficient set carrying only what the time split and the schedule read.
pub fn toy_coeff(theta0: Vec<f64>, theta1: Vec<f64>, epochs: Vec<usize>, epoch: Vec<usize>, gamma: f64) -> SolverCoefficients {
    let k = theta0.len();
    let time = TimeAllocation { tau0: 0.5, tau1: 0.5 };
    let mut c = SolverCoefficients {
        epsilon: vec![1.0; k],
        gamma,
        hover_time: 1.0,
        time,
        epoch,
        epochs,
        collector_gain: vec![1.0; k],
        dl_gain_sum: vec![1.0; k],
        ul_gain_sum: vec![1.0; k],
        theta0,
        theta1,
        phi: vec![0.0; k],
        gamma_cap: vec![0.0; k],
        lambda_cap: vec![0.0; k],
        omega_cap: vec![0.0; k],
        iota: vec![0.0; k],
        w: vec![],
        varpi: 0.0,
        argmax_pair: (0, 1),
    };
    c.w = compute_w(&c, time);
    let sched = Schedule { epoch: c.epoch.clone(), epochs_per_uav: vec![] };
    if let Ok((v, p)) = compute_varpi(&c, time, &sched) {
        c.varpi = v;
        c.argmax_pair = p;
    }
    c
}

/// Sum throughput on the line `tau0 + tau1 = 1`, written out from the rate definition.
pub fn throughput_on_line(theta0: &[f64], theta1: &[f64], l: &[usize], k: &[usize], tau0: f64) -> f64 {
    let tau1 = 1.0 - tau0;
    (0..theta0.len())
        .map(|i| {
            let snr = (theta0[i] * l[i] as f64 * tau0 + theta1[i] * (k[i] - 1) as f64 * tau1) / tau1;
            tau1 / l[i] as f64 * (1.0 + snr).ln()
        })
        .sum()
}

pub fn snr_ok(theta0: &[f64], theta1: &[f64], l: &[usize], k: &[usize], gamma: f64, tau0: f64) -> bool {
    let tau1 = 1.0 - tau0;
    (0..theta0.len()).all(|i| {
        let snr = (theta0[i] * l[i] as f64 * tau0 + theta1[i] * (k[i] - 1) as f64 * tau1) / tau1;
        snr >= gamma * (1.0 - 1e-12)
    })
}

/// Association with every device collected by `collector[i]` and charged by every UAV.
pub fn assoc_all(collector: &[usize], n: usize) -> AssociationState {
    let k = collector.len();
    AssociationState {
        dl_energy: vec![vec![true; n]; k],
        ul_info: collector.iter().map(|&c| (0..n).map(|j| j == c).collect()).collect(),
        ul_energy: vec![vec![true; n]; k],
    }
}

/// Small scenario with explicit devices.
pub fn scenario(devices: Vec<Vec2>, n: usize, m: usize, p_dbm: f64) -> Scenario {
    Scenario {
        uav_count: n,
        channel_count: m,
        region_radius: 80.0,
        hover_time: 1.0,
        altitude_bounds: (1.0, 150.0),
        seed: 0,
        channel: ChannelParams::urban(),
        radio: RadioParams::with_power_dbm(p_dbm),
        devices,
    }
}
