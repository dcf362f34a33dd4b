use super::oracle::*;
use uavdeploy::dl_opt::{dl_associate, dl_problem};
use uavdeploy::model::*;
use uavdeploy::placement::PlacementOptions;
use uavdeploy::ul_opt::{ul_energy_associate, ul_info_associate, ul_problem, InfoAssignment};
use uavdeploy::Error;

pub const REGIMES: [SnrRegime; 2] = [SnrRegime::Slack, SnrRegime::Binding];

/// Regimes whose coefficients are meaningful for this instance: the binding branch needs
/// the worst pair's threshold to exceed its full-duplex energy term.
pub fn regimes(inst: &Instance) -> Vec<SnrRegime> {
    let c = &inst.coeff;
    let (m, n) = c.argmax_pair;
    if c.gamma > c.theta1[m] * (n - 1) as f64 {
        REGIMES.to_vec()
    } else {
        vec![SnrRegime::Slack]
    }
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-300)
}

/// DL rows against enumeration on `count` instances; returns solved counts per regime.
pub fn dl_suite(count: u64) -> [usize; 2] {
    let mut solved = [0usize; 2];
    for seed in 0..count {
        let inst = instance(seed, None);
        let n = inst.scn.uav_count;
        for regime in regimes(&inst) {
            match dl_associate(&inst.scn, &inst.gains, &inst.coeff, regime) {
                Ok(rows) => {
                    solved[regime as usize] += 1;
                    for i in 0..inst.scn.device_count() {
                        let b = best_row(n, |r| dl_row_value(&inst, regime, i, r)).unwrap();
                        let v = dl_row_value(&inst, regime, i, &rows[i]).expect("chosen row must be feasible");
                        assert!(close(v, b), "seed {seed} device {i}: {v} vs {b}");
                    }
                }
                Err(Error::Coverage { device }) => {
                    assert!(best_row(n, |r| dl_row_value(&inst, regime, device, r)).is_none(), "seed {seed}");
                }
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
    }
    solved
}

/// UL energy rows against enumeration; returns checked device counts per regime.
pub fn ul_energy_suite(count: u64) -> [usize; 2] {
    let mut checked = [0usize; 2];
    for seed in 0..count {
        let inst = instance(1000 + seed, None);
        let n = inst.scn.uav_count;
        for regime in regimes(&inst) {
            let rows = match ul_energy_associate(&inst.scn, &inst.gains, &inst.coeff, regime, &inst.assoc.ul_info) {
                Ok(rows) => rows,
                Err(Error::Coverage { device }) => {
                    let p = inst.scn.radio.p_ut;
                    assert!((0..n).all(|j| p * inst.gains.ul[device][j] < inst.scn.radio.rho), "seed {seed}");
                    continue;
                }
                Err(e) => panic!("seed {seed}: {e}"),
            };
            for i in 0..inst.scn.device_count() {
                assert!(rows[i].iter().any(|&b| b));
                if inst.coeff.epoch[i] == 1 {
                    let j = rows[i].iter().position(|&b| b).unwrap();
                    assert_eq!(rows[i].iter().filter(|&&b| b).count(), 1);
                    let best = (0..n)
                        .filter(|&m| inst.scn.radio.p_ut * inst.gains.ul[i][m] >= inst.scn.radio.rho)
                        .map(|m| inst.gains.ul[i][m])
                        .fold(0.0, f64::max);
                    assert_eq!(inst.gains.ul[i][j], best);
                    continue;
                }
                checked[regime as usize] += 1;
                let b = best_row(n, |r| ul_energy_row_value(&inst, regime, i, r)).unwrap();
                let v = ul_energy_row_value(&inst, regime, i, &rows[i]).expect("chosen row must be feasible");
                assert!(close(v, b), "seed {seed} device {i}: {v} vs {b}");
            }
        }
    }
    checked
}

pub fn check_info(inst: &Instance, regime: SnrRegime, recompute: bool, seed: u64) {
    let got = ul_info_associate(&inst.scn, &inst.gains, &inst.coeff, regime, &inst.sched, InfoAssignment::PerDevice);
    let best = best_assignment(inst, regime, recompute);
    match (got, best) {
        (Ok((a, epochs)), Some(b)) => {
            let m = inst.scn.channel_count;
            let mut counts = vec![0; inst.scn.uav_count];
            let mut total = 0.0;
            for (i, row) in a.iter().enumerate() {
                assert_eq!(row.iter().filter(|&&x| x).count(), 1);
                counts[row.iter().position(|&x| x).unwrap()] += 1;
                let j = row.iter().position(|&x| x).unwrap();
                let l = inst.sched.epochs_per_uav[j];
                total += info_value(inst, regime, i, j, l).unwrap();
            }
            let expect: Vec<usize> = counts.iter().map(|c: &usize| c.div_ceil(m)).collect();
            assert_eq!(epochs, expect);
            assert!(close(total, b), "seed {seed}: {total} vs {b}");
        }
        (Err(Error::SnrInfeasible { .. }), None) => {}
        (r, b) => panic!("seed {seed}: {r:?} vs {b:?}"),
    }
}

/// UL information association against enumeration. With `m = Some(M)` and M >= K every
/// UAV runs a single epoch whatever the assignment, so epochs are recomputed.
pub fn info_suite(base: u64, count: u64, m: Option<usize>) {
    for seed in 0..count {
        let inst = instance(base + seed, m);
        for regime in regimes(&inst) {
            check_info(&inst, regime, m.is_some(), seed);
        }
    }
}
/// Solver value vs grid on placement problems drawn from random association instances.
pub fn grid_suite(kind: &str, count: usize, slack: impl Fn(f64) -> f64) -> usize {
    let mut done = 0;
    let mut seed = 0;
    while done < count {
        seed += 1;
        let inst = instance(5000 + seed, None);
        let regime = inst.coeff.regime();
        let uav = 0;
        let (value, feasible, centers, init, out): (Box<dyn Fn(&Vec3) -> f64>, Box<dyn Fn(&Vec3) -> bool>, Vec<Vec2>, Vec3, _);
        if kind == "dl" {
            let prob = dl_problem(&inst.scn, &inst.assoc, &inst.coeff, regime, uav);
            if prob.terms.is_empty() {
                continue;
            }
            centers = prob.terms.iter().map(|t| t.device).collect();
            init = Vec3::new(centers[0].x, centers[0].y, 40.0);
            out = prob.solve(&init, uav, &PlacementOptions::default());
            let p2 = prob.clone();
            value = Box::new(move |p| prob.value(p));
            feasible = Box::new(move |p| p2.feasible(p));
        } else {
            let prob = ul_problem(&inst.scn, &inst.gains, &inst.assoc, &inst.coeff, regime, uav);
            if prob.terms.is_empty() {
                continue;
            }
            centers = prob.terms.iter().map(|t| t.device).collect();
            init = Vec3::new(centers[0].x, centers[0].y, 40.0);
            out = prob.solve(&init, uav, &PlacementOptions::default());
            let p2 = prob.clone();
            value = Box::new(move |p| prob.value(p));
            feasible = Box::new(move |p| p2.feasible(p));
        }
        let grid = grid_best(&value, &feasible, &centers, inst.scn.altitude_bounds, 10.0);
        match (out, grid) {
            (Ok(o), Some((_, best))) => {
                assert!(feasible(&o.position));
                assert!(o.value >= best - slack(best), "{kind} seed {seed}: {} vs {best}", o.value);
                done += 1;
            }
            (Err(_), None) => {}
            (Ok(_), None) => {}
            (Err(e), Some(g)) => panic!("{kind} seed {seed}: {e} but grid found {g:?}"),
        }
    }
    done
}

