mod common;

use common::checks::grid_suite;

use common::oracle::*;
use uavdeploy::channel::{excess_path_function, fit_quadratic, QuadraticFit};
use uavdeploy::dl_opt::{DlPlacementProblem, RatioTerm};
use uavdeploy::model::*;
use uavdeploy::placement::PlacementOptions;
use uavdeploy::ul_opt::{concave_lower_bound, UlPlacementProblem, UlRatioTerm};

fn dl_toy(devices: &[Vec2], alpha: (f64, f64, f64), p_dbm: f64) -> DlPlacementProblem {
    let ch = ChannelParams::urban();
    let radio = RadioParams::with_power_dbm(p_dbm);
    DlPlacementProblem {
        channel: ch,
        terms: devices.iter().map(|&d| RatioTerm { device: d, alpha1: alpha.0, alpha2: alpha.1, alpha3: alpha.2 }).collect(),
        energy_limit: uavdeploy::channel::energy_limit(radio.p_ut, radio.rho, &ch),
        altitude_bounds: (1.0, 150.0),
    }
}

#[test]
fn dl_single_device_sits_above_it() {
    let s = Vec2::new(12.0, -7.0);
    let prob = dl_toy(&[s], (1e-9, 0.5, 1.0), 80.0);
    let out = prob.solve(&Vec3::new(0.0, 0.0, 40.0), 0, &PlacementOptions::default()).unwrap();
    assert!((out.position.xy() - s).norm() < 1e-3, "{:?}", out.position);
    assert!(out.value >= out.initial_value);
}

#[test]
fn dl_symmetric_pair_goes_to_midpoint() {
    let prob = dl_toy(&[Vec2::new(-15.0, 4.0), Vec2::new(15.0, 4.0)], (1e-9, 0.5, 1.0), 80.0);
    let out = prob.solve(&Vec3::new(3.0, -6.0, 40.0), 0, &PlacementOptions::default()).unwrap();
    assert!((out.position.xy() - Vec2::new(0.0, 4.0)).norm() < 1e-2, "{:?}", out.position);
}

#[test]
fn dl_three_devices_beat_grid() {
    let devices = [Vec2::new(-10.0, 0.0), Vec2::new(8.0, 9.0), Vec2::new(5.0, -12.0)];
    let prob = dl_toy(&devices, (1e-9, 0.5, 1.0), 75.0);
    let out = prob.solve(&Vec3::new(0.0, 0.0, 40.0), 0, &PlacementOptions::default()).unwrap();
    assert!(prob.feasible(&out.position));
    let (_, best) = grid_best(|p| prob.value(p), |p| prob.feasible(p), &devices, (1.0, 150.0), 10.0).unwrap();
    assert!(out.value >= best - 1e-3 * best.abs(), "{} vs {best}", out.value);
}

#[test]
fn dl_trace_is_nondecreasing() {
    let devices = [Vec2::new(-30.0, 10.0), Vec2::new(20.0, 25.0), Vec2::new(0.0, -35.0), Vec2::new(10.0, 0.0)];
    let prob = dl_toy(&devices, (3e-10, 0.3, 2.0), 76.0);
    let out = prob.solve(&Vec3::new(40.0, 40.0, 100.0), 0, &PlacementOptions::default()).unwrap();
    for w in out.trace.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-12), "{:?}", out.trace);
    }
}

#[test]
fn dl_slack_zeroes_gradient() {
    let devices = [Vec2::new(-10.0, 0.0), Vec2::new(8.0, 9.0)];
    let prob = dl_toy(&devices, (1e-9, 0.5, 1.5), 80.0);
    let p = Vec3::new(3.0, 2.0, 45.0);
    let slack = prob.slack(&p);
    for i in 0..slack.len() {
        let h = 1e-6 * slack[i];
        let mut up = slack.clone();
        up[i] += h;
        let mut down = slack.clone();
        down[i] -= h;
        let g = (prob.transformed(&p, &up) - prob.transformed(&p, &down)) / (2.0 * h);
        assert!(g.abs() < 1e-6, "{g}");
    }
    assert!((prob.transformed(&p, &slack) - prob.value(&p)).abs() < 1e-12 * prob.value(&p).abs());
}

#[test]
fn ul_without_energy_links_matches_dl_shape() {
    let s = Vec2::new(-5.0, 18.0);
    let prob = UlPlacementProblem {
        channel: ChannelParams::urban(),
        terms: vec![UlRatioTerm {
            device: s,
            energy_link: false,
            phi1: 1.0,
            phi2: 0.0,
            rho1: 1e-9,
            rho2: 0.5,
            rho3: 0.0,
            limit: 1e9,
        }],
        energy_only: vec![],
        altitude_bounds: (1.0, 150.0),
    };
    let out = prob.solve(&Vec3::new(10.0, 0.0, 40.0), 0, &PlacementOptions::default()).unwrap();
    assert!((out.position.xy() - s).norm() < 1e-3, "{:?}", out.position);
    let dl = dl_toy(&[s], (1e-9, 0.5, 1.0), 80.0);
    let p = Vec3::new(3.0, 4.0, 33.0);
    assert!((prob.value(&p) - dl.value(&p)).abs() < 1e-14);
}

#[test]
fn ul_energy_linked_pair_beats_grid() {
    let ch = ChannelParams::urban();
    let a = Vec2::new(-12.0, 3.0);
    let b = Vec2::new(10.0, -6.0);
    let prob = UlPlacementProblem {
        channel: ch,
        terms: vec![
            UlRatioTerm { device: a, energy_link: false, phi1: 1.0, phi2: 0.0, rho1: 1e-9, rho2: 0.5, rho3: 0.0, limit: 1e9 },
            UlRatioTerm {
                device: b,
                energy_link: true,
                phi1: 2e-9,
                phi2: 0.3,
                rho1: 1e-18,
                rho2: 1e-9,
                rho3: 0.4,
                limit: 1e9,
            },
        ],
        energy_only: vec![],
        altitude_bounds: (1.0, 150.0),
    };
    let out = prob.solve(&Vec3::new(0.0, 0.0, 40.0), 0, &PlacementOptions::default()).unwrap();
    let (_, best) = grid_best(|p| prob.value(p), |p| prob.feasible(p), &[a, b], (1.0, 150.0), 10.0).unwrap();
    assert!(out.value >= best - 1e-3 * best.abs(), "{} vs {best}", out.value);
}

fn fit40() -> QuadraticFit {
    fit_quadratic(40.0, &ChannelParams::urban(), (40.0, 200.0), 200).unwrap()
}

#[test]
fn lower_bound_is_tight_where_the_halves_meet() {
    let fit = fit40();
    let k0 = ChannelParams::urban().kappa0();
    let (phi1, phi2, xi) = (3e-9, 0.7, 1.3);
    let exact = |d: f64, k0: f64| 2.0 * xi * (phi1 * k0 * k0 * fit.eval(d) + phi2).sqrt();
    // With the carrier constant in the path loss.
    let d = (2.0 * phi1 * k0 * k0 * fit.k3 + 2.0 * phi2).sqrt() / (fit.k1 * (2.0 * phi1).sqrt() * k0) - fit.k2 / fit.k1;
    let c = concave_lower_bound(phi1, phi2, xi, k0, &fit, d);
    assert!((c - exact(d, k0)).abs() < 1e-9 * exact(d, k0), "{c} vs {}", exact(d, k0));
    // The same statement with the carrier constant set to one.
    let (phi1, phi2) = (2.0, 5e4);
    let d = (2.0 * phi1 * fit.k3 + 2.0 * phi2).sqrt() / (fit.k1 * (2.0 * phi1).sqrt()) - fit.k2 / fit.k1;
    let c = concave_lower_bound(phi1, phi2, xi, 1.0, &fit, d);
    let e = 2.0 * xi * (phi1 * fit.eval(d) + phi2).sqrt();
    assert!((c - e).abs() < 1e-9 * e, "{c} vs {e}");
}

#[test]
fn lower_bound_never_exceeds_the_root() {
    let fit = fit40();
    let k0 = ChannelParams::urban().kappa0();
    for (phi1, phi2) in [(3e-9, 0.7), (1e-7, 1e-3), (1e-10, 50.0)] {
        for s in 0..=400 {
            let d = 40.0 + s as f64 * 0.4;
            let c = concave_lower_bound(phi1, phi2, 0.9, k0, &fit, d);
            let e = 2.0 * 0.9 * (phi1 * k0 * k0 * fit.eval(d) + phi2).sqrt();
            assert!(c <= e * (1.0 + 1e-12), "d={d}: {c} > {e}");
        }
    }
}

#[test]
fn fit_surrogate_tracks_exact_loss() {
    let fit = fit40();
    let ch = ChannelParams::urban();
    for off in [0.0, 10.0, 30.0, 60.0, 120.0] {
        let d = (off * off + 1600.0f64).sqrt();
        let exact = excess_path_function(d, 40.0, &ch).unwrap();
        assert!((fit.eval(d) - exact).abs() <= fit.max_rel_error * exact * 1.05 + 1e-9);
    }
}

#[test]
fn dl_placement_beats_grid_on_random_instances() {
    assert_eq!(grid_suite("dl", 30, |b| 1e-3 * b.abs()), 30);
}

#[test]
fn ul_placement_beats_grid_on_random_instances() {
    assert_eq!(grid_suite("ul", 30, |b| 1e-3 * b.abs()), 30);
}
