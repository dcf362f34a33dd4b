//! Random association instances and exhaustive reference solutions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavdeploy::channel::LinkGains;
use uavdeploy::model::*;
use uavdeploy::time_sched::coefficients_from_gains;

fn in_disc(rng: &mut ChaCha8Rng, r: f64) -> Vec2 {
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    let d = r * rng.gen_range(0.0f64..1.0).sqrt();
    Vec2::new(d * a.cos(), d * a.sin())
}

pub struct Instance {
    pub scn: Scenario,
    pub gains: LinkGains,
    pub assoc: AssociationState,
    pub sched: Schedule,
    pub coeff: SolverCoefficients,
}

/// Random instance with `K <= 6`, `N <= 3`; `m` overrides the subcarrier count.
pub fn instance(seed: u64, m: Option<usize>) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(2..=6);
    let n = rng.gen_range(1..=3);
    let m = m.unwrap_or_else(|| rng.gen_range(1..=3));
    let devices: Vec<Vec2> = (0..k).map(|_| in_disc(&mut rng, 60.0)).collect();
    let uavs = |rng: &mut ChaCha8Rng| -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                let p = in_disc(rng, 50.0);
                Vec3::new(p.x, p.y, rng.gen_range(20.0..90.0))
            })
            .collect()
    };
    let dl = uavs(&mut rng);
    let ul = uavs(&mut rng);
    let p_dbm = rng.gen_range(68.0..80.0);
    let mut scn = super::scenario(devices, n, m, p_dbm);
    scn.seed = seed;
    let gains = LinkGains::compute(&scn.devices, &dl, &ul, &scn.channel).unwrap();

    let collector: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
    let mut assoc = super::assoc_all(&collector, n);
    for i in 0..k {
        for j in 0..n {
            assoc.dl_energy[i][j] = rng.gen_bool(0.6);
            assoc.ul_energy[i][j] = j == collector[i] || rng.gen_bool(0.5);
        }
        let j = rng.gen_range(0..n);
        assoc.dl_energy[i][j] = true;
    }
    let mut epoch = vec![0; k];
    let mut epochs_per_uav = vec![0; n];
    for j in 0..n {
        let mut mine: Vec<usize> = (0..k).filter(|&i| collector[i] == j).collect();
        mine.shuffle(&mut rng);
        epochs_per_uav[j] = mine.len().div_ceil(m);
        for (pos, &i) in mine.iter().enumerate() {
            epoch[i] = pos / m + 1;
        }
    }
    let sched = Schedule { epoch, epochs_per_uav };
    let tau0 = rng.gen_range(0.2..0.8);
    let time = TimeAllocation { tau0, tau1: 1.0 - tau0 };
    let coeff = coefficients_from_gains(&scn, &gains, &assoc, &sched, time).unwrap();
    Instance { scn, gains, assoc, sched, coeff }
}

fn feasible(inst: &Instance, g: f64) -> bool {
    inst.scn.radio.p_ut * g >= inst.scn.radio.rho
}

/// All non-empty rows over `n` UAVs.
pub fn rows(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (1u32..(1 << n)).map(move |mask| (0..n).map(|j| mask >> j & 1 == 1).collect())
}

/// Downlink row objective (minimized), or `None` when the row charges from an infeasible UAV.
pub fn dl_row_value(inst: &Instance, regime: SnrRegime, i: usize, row: &[bool]) -> Option<f64> {
    let c = &inst.coeff;
    let t = c.time;
    let mut g = 0.0;
    for (j, &on) in row.iter().enumerate() {
        if on {
            if !feasible(inst, inst.gains.dl[i][j]) {
                return None;
            }
            g += inst.gains.dl[i][j];
        }
    }
    let head = c.phi[i] * (1.0 + c.theta1[i] * (c.epoch[i] - 1) as f64);
    Some(match regime {
        SnrRegime::Slack => (head - t.tau1 * g) / (head + t.tau0 * g),
        SnrRegime::Binding => 1.0 / (head + c.gamma_cap[i] * g),
    })
}

/// Uplink-energy row objective (minimized) for a device scheduled after the first epoch.
pub fn ul_energy_row_value(inst: &Instance, regime: SnrRegime, i: usize, row: &[bool]) -> Option<f64> {
    let c = &inst.coeff;
    let j = (0..inst.scn.uav_count).find(|&j| inst.assoc.ul_info[i][j]).unwrap();
    let loss = 1.0 / inst.gains.ul[i][j];
    let mut beta = 0.0;
    for (m, &on) in row.iter().enumerate() {
        if on {
            if !feasible(inst, inst.gains.ul[i][m]) {
                return None;
            }
            beta += c.epsilon[i] * (c.epoch[i] - 1) as f64 * inst.gains.ul[i][m];
        }
    }
    Some(match regime {
        SnrRegime::Slack => c.lambda_cap[i] * (loss + beta) + c.time.tau0,
        SnrRegime::Binding => (c.omega_cap[i] + loss + beta) / (c.omega_cap[i] + beta),
    })
}

/// Best row value, or `None` when no row is feasible.
pub fn best_row(n: usize, value: impl Fn(&[bool]) -> Option<f64>) -> Option<f64> {
    rows(n).filter_map(|r| value(&r)).reduce(f64::min)
}

/// Score of collecting device `i` at UAV `j` when that UAV runs `l` epochs.
pub fn info_value(inst: &Instance, regime: SnrRegime, i: usize, j: usize, l: usize) -> Option<f64> {
    let c = &inst.coeff;
    let t = c.time;
    let eps = c.epsilon[i];
    let k = c.epoch[i];
    let l = l.max(1) as f64;
    let loss = 1.0 / inst.gains.ul[i][j];
    let gd: f64 = (0..inst.scn.uav_count).filter(|&n| inst.assoc.dl_energy[i][n]).map(|n| inst.gains.dl[i][n]).sum();
    let gu: f64 = (0..inst.scn.uav_count).filter(|&n| inst.assoc.ul_energy[i][n]).map(|n| inst.gains.ul[i][n]).sum();
    let chi = l * t.tau0 * gd + (k - 1) as f64 * t.tau1 * gu;
    if t.tau1 * c.gamma * loss / eps > chi * (1.0 + 1e-12) {
        return None;
    }
    let beta = eps * (k - 1) as f64 * gu;
    Some(match regime {
        SnrRegime::Slack => {
            let lam = t.tau1 / (eps * l * gd);
            1.0 / (lam * (loss + beta) + t.tau0)
        }
        SnrRegime::Binding => {
            let (m, n) = c.argmax_pair;
            let base = (c.gamma - c.theta1[m] * (n - 1) as f64) / (c.theta0[m] * c.epochs[m] as f64);
            let om = eps * gd * l * base;
            (om + beta) / (om + beta + loss)
        }
    })
}

/// Best total score over all `N^K` assignments, recomputing epoch counts for each candidate
/// when `recompute` is set and using the current counts otherwise.
pub fn best_assignment(inst: &Instance, regime: SnrRegime, recompute: bool) -> Option<f64> {
    let k = inst.scn.device_count();
    let n = inst.scn.uav_count;
    let m = inst.scn.channel_count;
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; k];
    loop {
        let mut counts = vec![0usize; n];
        for &j in &pick {
            counts[j] += 1;
        }
        let mut total = Some(0.0);
        for i in 0..k {
            let j = pick[i];
            let l = if recompute { counts[j].div_ceil(m) } else { inst.sched.epochs_per_uav[j] };
            total = match (total, info_value(inst, regime, i, j, l)) {
                (Some(t), Some(v)) => Some(t + v),
                _ => None,
            };
        }
        if let Some(t) = total {
            best = Some(best.map_or(t, |b: f64| b.max(t)));
        }
        let mut pos = 0;
        loop {
            if pos == k {
                return best;
            }
            pick[pos] += 1;
            if pick[pos] < n {
                break;
            }
            pick[pos] = 0;
            pos += 1;
        }
    }
}

/// Best feasible value on a 1 m horizontal / 5 m altitude grid spanning the bounding box
/// of `centers` padded by `pad` meters.
pub fn grid_best(
    value: impl Fn(&Vec3) -> f64,
    feasible: impl Fn(&Vec3) -> bool,
    centers: &[Vec2],
    bounds: (f64, f64),
    pad: f64,
) -> Option<(Vec3, f64)> {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for c in centers {
        x0 = x0.min(c.x);
        x1 = x1.max(c.x);
        y0 = y0.min(c.y);
        y1 = y1.max(c.y);
    }
    let (x0, y0) = ((x0 - pad).floor(), (y0 - pad).floor());
    let (x1, y1) = ((x1 + pad).ceil(), (y1 + pad).ceil());
    let mut alts = vec![bounds.0];
    let mut h = (bounds.0 / 5.0).floor() * 5.0 + 5.0;
    while h <= bounds.1 {
        alts.push(h);
        h += 5.0;
    }
    let mut best: Option<(Vec3, f64)> = None;
    for &h in &alts {
        let mut x = x0;
        while x <= x1 {
            let mut y = y0;
            while y <= y1 {
                let p = Vec3::new(x, y, h);
                if feasible(&p) {
                    let v = value(&p);
                    if best.is_none_or(|b| v > b.1) {
                        best = Some((p, v));
                    }
                }
                y += 1.0;
            }
            x += 1.0;
        }
    }
    best
}
