use approx::assert_relative_eq;
use proptest::prelude::*;
use uavdeploy::channel::*;
use uavdeploy::model::{ChannelParams, Vec2, Vec3};
use uavdeploy::Error;

// Second, deliberately naive evaluation of the path loss from the raw constants.
fn reference_loss(d: f64, h: f64) -> f64 {
    let beta = 11.95;
    let psi = 0.14;
    let theta = (h / d).asin() * 180.0 / std::f64::consts::PI;
    let p = 1.0 / (1.0 + beta * (-psi * (theta - beta)).exp());
    let mu_l = 10f64.powf(0.3);
    let mu_n = 10f64.powf(2.3);
    let k0 = 4.0 * std::f64::consts::PI * 2.0e9 / 299_792_458.0;
    (k0 * d).powi(2) * (p * mu_l + (1.0 - p) * mu_n)
}

#[test]
fn los_probability_at_theta_equal_beta() {
    let ch = ChannelParams::urban();
    // Choose d so that asin(h/d) is exactly beta degrees.
    let h = 10.0;
    let d = h / ch.beta.to_radians().sin();
    let g = LinkGeometry::new(d, h).unwrap();
    assert_relative_eq!(g.elevation_deg, 11.95, epsilon = 1e-9);
    assert_relative_eq!(los_probability(&g, &ch), 1.0 / 12.95, epsilon = 1e-9);
    assert_relative_eq!(1.0 / 12.95, 0.07722, epsilon = 1e-5);
}

#[test]
fn los_probability_overhead() {
    let ch = ChannelParams::urban();
    let g = LinkGeometry::new(30.0, 30.0).unwrap();
    let expected = 1.0 / (1.0 + 11.95 * (-0.14f64 * (90.0 - 11.95)).exp());
    assert_relative_eq!(los_probability(&g, &ch), expected, epsilon = 1e-12);
    assert_relative_eq!(expected, 0.9998, epsilon = 1e-4);
}

#[test]
fn los_probability_grows_with_elevation() {
    let ch = ChannelParams::urban();
    let at = |deg: f64| {
        let h = 10.0;
        los_probability(&LinkGeometry::new(h / deg.to_radians().sin(), h).unwrap(), &ch)
    };
    assert!(at(30.0) > at(10.0));
}

#[test]
fn pure_los_gain() {
    let ch = ChannelParams::pure_los(2.0);
    let g = LinkGeometry::new(80.0, 20.0).unwrap();
    let k0 = ch.kappa0();
    assert_relative_eq!(average_gain(&g, &ch).unwrap(), 1.0 / ((k0 * 80.0).powi(2) * 2.0), max_relative = 1e-12);
    assert_relative_eq!(excess_path_function(80.0, 20.0, &ch).unwrap(), 2.0 * 6400.0, max_relative = 1e-12);
}

#[test]
fn path_loss_matches_reference_at_50_40() {
    let ch = ChannelParams::urban();
    let g = LinkGeometry::new(50.0, 40.0).unwrap();
    assert_relative_eq!(path_loss(&g, &ch).unwrap(), reference_loss(50.0, 40.0), max_relative = 1e-12);
    let gain = gain_between(&Vec3::new(30.0, 0.0, 40.0), &Vec2::zeros(), &ch).unwrap();
    assert_relative_eq!(gain, 1.0 / reference_loss(50.0, 40.0), max_relative = 1e-12);
}

#[test]
fn gain_decreases_with_distance() {
    let ch = ChannelParams::urban();
    for h in [10.0, 40.0, 100.0] {
        let mut prev = f64::INFINITY;
        for s in 0..=900 {
            let d = h + s as f64 * 9.0 * h / 900.0;
            let g = average_gain(&LinkGeometry::new(d, h).unwrap(), &ch).unwrap();
            assert!(g < prev, "h={h} d={d}");
            prev = g;
        }
    }
}

#[test]
fn distance_below_altitude_is_rejected() {
    assert!(matches!(LinkGeometry::new(5.0, 10.0), Err(Error::Domain(_))));
    assert!(matches!(excess_path_function(5.0, 10.0, &ChannelParams::urban()), Err(Error::Domain(_))));
}

#[test]
fn excess_overhead_endpoint() {
    let ch = ChannelParams::urban();
    let h = 35.0;
    assert_relative_eq!(
        excess_path_function(h, h, &ch).unwrap(),
        mean_excess_loss(90.0, &ch) * h * h,
        max_relative = 1e-12
    );
}

#[test]
fn pure_los_fit_is_exact() {
    let ch = ChannelParams::pure_los(2.0);
    let fit = fit_quadratic(30.0, &ch, (30.0, 300.0), 100).unwrap();
    assert_relative_eq!(fit.k1, 2f64.sqrt(), max_relative = 1e-8);
    assert!(fit.k2.abs() < 1e-6);
    assert!(fit.k3.abs() < 1e-3);
    assert!(fit.max_rel_error < 1e-9);
}

#[test]
fn fit_error_is_what_it_claims() {
    let ch = ChannelParams::urban();
    let fit = fit_quadratic(40.0, &ch, (40.0, 300.0), 200).unwrap();
    // Midpoints of the sample grid were not used by the fit.
    let step = 260.0 / 199.0;
    let mut worst: f64 = 0.0;
    for s in 0..199 {
        let d = 40.0 + (s as f64 + 0.5) * step;
        let f = excess_path_function(d, 40.0, &ch).unwrap();
        worst = worst.max(((fit.eval(d) - f) / f).abs());
    }
    assert!(worst <= fit.max_rel_error * 1.05 + 1e-6, "{worst} vs {}", fit.max_rel_error);
}

#[test]
fn fit_rejects_bad_ranges() {
    let ch = ChannelParams::urban();
    assert!(fit_quadratic(40.0, &ch, (10.0, 300.0), 100).is_err());
    assert!(fit_quadratic(40.0, &ch, (40.0, 300.0), 2).is_err());
}

#[test]
fn coverage_radius_closed_form() {
    let ch = ChannelParams::pure_los(2.0);
    let h = 25.0;
    let d = coverage_radius(2.0 * (2.0 * h) * (2.0 * h), h, &ch).unwrap();
    assert_relative_eq!(d, 2.0 * h, max_relative = 1e-8);
}

#[test]
fn coverage_radius_inverts_f() {
    let ch = ChannelParams::urban();
    let limit = excess_path_function(90.0, 40.0, &ch).unwrap();
    let d = coverage_radius(limit, 40.0, &ch).unwrap();
    assert!((d - 90.0).abs() < 1e-6, "{d}");
    assert!(excess_path_function(d, 40.0, &ch).unwrap() <= limit);
}

#[test]
fn coverage_radius_below_floor() {
    let ch = ChannelParams::urban();
    let floor = excess_path_function(40.0, 40.0, &ch).unwrap();
    assert!(matches!(coverage_radius(0.5 * floor, 40.0, &ch), Err(Error::NoCoverage { .. })));
}

#[test]
fn gain_table_shape() {
    let ch = ChannelParams::urban();
    let devices = vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 5.0), Vec2::new(-20.0, 3.0)];
    let dl = vec![Vec3::new(0.0, 0.0, 30.0), Vec3::new(5.0, 5.0, 60.0)];
    let ul = vec![Vec3::new(1.0, 0.0, 20.0), Vec3::new(-5.0, 2.0, 50.0)];
    let g = LinkGains::compute(&devices, &dl, &ul, &ch).unwrap();
    assert_eq!(g.dl.len(), 3);
    assert_eq!(g.ul[0].len(), 2);
    assert_relative_eq!(g.ul[1][1], gain_between(&ul[1], &devices[1], &ch).unwrap());
}

proptest! {
    #[test]
    fn f_doubles_up(h in 5.0f64..150.0, factor in 1.0f64..5.0) {
        let ch = ChannelParams::urban();
        let d = h * factor;
        prop_assert!(excess_path_function(2.0 * d, h, &ch).unwrap() > excess_path_function(d, h, &ch).unwrap());
    }

    #[test]
    fn path_loss_matches_reference(h in 5.0f64..150.0, factor in 1.0f64..10.0) {
        let d = h * factor;
        let g = LinkGeometry::new(d, h).unwrap();
        let ours = path_loss(&g, &ChannelParams::urban()).unwrap();
        prop_assert!((ours / reference_loss(d, h) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn los_probability_in_unit_interval(h in 1.0f64..150.0, factor in 1.0f64..50.0) {
        let p = los_probability(&LinkGeometry::new(h * factor, h).unwrap(), &ChannelParams::urban());
        prop_assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn coverage_round_trip(h in 5.0f64..120.0, factor in 1.05f64..6.0) {
        let ch = ChannelParams::urban();
        let d = h * factor;
        let limit = excess_path_function(d, h, &ch).unwrap();
        let back = coverage_radius(limit, h, &ch).unwrap();
        prop_assert!((back - d).abs() <= 1e-6 * d.max(1.0));
        prop_assert!(excess_path_function(back, h, &ch).unwrap() <= limit);
    }

    #[test]
    fn energy_limit_matches_threshold(p_dbm in 60.0f64..90.0, h in 10.0f64..100.0) {
        let ch = ChannelParams::urban();
        let p = uavdeploy::model::dbm_to_watts(p_dbm);
        let rho = uavdeploy::model::dbm_to_watts(-18.0);
        let limit = energy_limit(p, rho, &ch);
        if let Ok(d) = coverage_radius(limit, h, &ch) {
            let g = average_gain(&LinkGeometry::new(d, h).unwrap(), &ch).unwrap();
            prop_assert!((p * g / rho - 1.0).abs() < 1e-6);
        }
    }
}
