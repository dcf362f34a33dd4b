//! Probabilistic air-to-ground channel.
//!
//! A link of length `d` to a UAV at altitude `h` sees elevation
//! `theta = (180/pi) asin(h/d)` degrees and line-of-sight probability
//! `1 / (1 + beta exp(-psi (theta - beta)))`. The average path loss blends the
//! two excess losses, `D = (kappa0 d)^alpha [P mu_los + (1 - P) mu_nlos]`, and
//! the average gain is `1/D`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelParams, Vec2, Vec3};
use crate::numerics::bisect_root;

/// Distance, altitude and elevation of one UAV-device link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance: f64,
    pub altitude: f64,
    pub elevation_deg: f64,
}

impl LinkGeometry {
    pub fn new(distance: f64, altitude: f64) -> Result<Self> {
        if !(altitude > 0.0) || !(distance.is_finite()) {
            return Err(Error::Domain(format!("altitude must be positive, got {altitude}")));
        }
        if distance < altitude * (1.0 - 1e-12) {
            return Err(Error::Domain(format!("distance {distance} below altitude {altitude}")));
        }
        Ok(Self::unchecked(distance.max(altitude), altitude))
    }

    /// Link between a UAV and a ground device.
    pub fn between(uav: &Vec3, device: &Vec2) -> Result<Self> {
        let dx = uav.x - device.x;
        let dy = uav.y - device.y;
        let d = (dx * dx + dy * dy + uav.z * uav.z).sqrt();
        Self::new(d, uav.z)
    }

    fn unchecked(distance: f64, altitude: f64) -> Self {
        let s = (altitude / distance).min(1.0);
        LinkGeometry { distance, altitude, elevation_deg: s.asin().to_degrees() }
    }
}

pub fn los_probability(geom: &LinkGeometry, ch: &ChannelParams) -> f64 {
    los_at(geom.elevation_deg, ch)
}

fn los_at(theta: f64, ch: &ChannelParams) -> f64 {
    1.0 / (1.0 + ch.beta * (-ch.psi * (theta - ch.beta)).exp())
}

/// `P mu_los + (1 - P) mu_nlos` at elevation `theta` degrees.
pub fn mean_excess_loss(theta: f64, ch: &ChannelParams) -> f64 {
    let p = los_at(theta, ch);
    p * ch.mu_los + (1.0 - p) * ch.mu_nlos
}

/// Average path loss `D` (the reciprocal of the average gain).
pub fn path_loss(geom: &LinkGeometry, ch: &ChannelParams) -> Result<f64> {
    if !(geom.distance > 0.0) {
        return Err(Error::Domain("zero link distance".into()));
    }
    Ok((ch.kappa0() * geom.distance).powf(ch.path_exponent) * mean_excess_loss(geom.elevation_deg, ch))
}

pub fn average_gain(geom: &LinkGeometry, ch: &ChannelParams) -> Result<f64> {
    path_loss(geom, ch).map(|d| 1.0 / d)
}

/// Average gain between a UAV position and a ground device.
pub fn gain_between(uav: &Vec3, device: &Vec2, ch: &ChannelParams) -> Result<f64> {
    average_gain(&LinkGeometry::between(uav, device)?, ch)
}

/// `F(d) = d^2 [P mu_los + (1 - P) mu_nlos]` for a UAV at altitude `h`.
pub fn excess_path_function(d: f64, h: f64, ch: &ChannelParams) -> Result<f64> {
    let g = LinkGeometry::new(d, h)?;
    Ok(excess_unchecked(g.distance, h, ch))
}

/// [`excess_path_function`] without argument checks; `d >= h > 0` is assumed.
pub(crate) fn excess_unchecked(d: f64, h: f64, ch: &ChannelParams) -> f64 {
    let d = d.max(h);
    let theta = (h / d).min(1.0).asin().to_degrees();
    d * d * mean_excess_loss(theta, ch)
}

/// `F` as a function of the horizontal offset `r` and altitude `h`.
pub(crate) fn excess_at_offset(r: f64, h: f64, ch: &ChannelParams) -> f64 {
    excess_unchecked((r * r + h * h).sqrt(), h, ch)
}

/// Least-squares approximation `F(d) ≈ (k1 d + k2)^2 + k3` at a fixed altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub altitude: f64,
    pub fit_range: (f64, f64),
    /// Largest `|fit - F| / F` over the sample grid.
    pub max_rel_error: f64,
}

impl QuadraticFit {
    pub fn eval(&self, d: f64) -> f64 {
        let t = self.k1 * d + self.k2;
        t * t + self.k3
    }

    /// Derivative of [`QuadraticFit::eval`] with respect to `d`.
    pub fn slope(&self, d: f64) -> f64 {
        2.0 * self.k1 * (self.k1 * d + self.k2)
    }
}

/// Fits `a d^2 + b d + c` to `F` on `samples` evenly spaced distances.
///
/// Residuals are weighted by `1/F`, so the fit minimizes squared relative error.
pub fn fit_quadratic(h: f64, ch: &ChannelParams, range: (f64, f64), samples: usize) -> Result<QuadraticFit> {
    let (lo, hi) = range;
    if samples < 3 {
        return Err(Error::Parameter("a quadratic fit needs at least 3 samples".into()));
    }
    if !(h > 0.0) || lo < h * (1.0 - 1e-12) || !(hi > lo) {
        return Err(Error::Parameter(format!("bad fit range [{lo}, {hi}] at altitude {h}")));
    }
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|s| {
            let d = lo + (hi - lo) * s as f64 / (samples - 1) as f64;
            (d, excess_unchecked(d, h, ch))
        })
        .collect();

    // Work in x = d / hi to keep the normal equations well scaled.
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(d, f) in &pts {
        let x = d / hi;
        let w = 1.0 / f;
        let row = Vector3::new(x * x * w, x * w, w);
        ata += row * row.transpose();
        atb += row * (f * w);
    }
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::Domain("singular fit system".into()))?;
    let a = sol[0] / (hi * hi);
    let b = sol[1] / hi;
    let c = sol[2];
    if !(a > 0.0) {
        return Err(Error::FitFailure { a, b, c });
    }
    let k1 = a.sqrt();
    let k2 = b / (2.0 * k1);
    let k3 = c - b * b / (4.0 * a);
    let mut fit = QuadraticFit { k1, k2, k3, altitude: h, fit_range: range, max_rel_error: 0.0 };
    fit.max_rel_error = pts
        .iter()
        .map(|&(d, f)| ((fit.eval(d) - f) / f).abs())
        .fold(0.0, f64::max);
    Ok(fit)
}

/// Link distance at which `F` reaches `limit` for a UAV at altitude `h`.
///
/// The returned distance never exceeds the exact root, so `F(d) <= limit` holds there.
pub fn coverage_radius(limit: f64, h: f64, ch: &ChannelParams) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("altitude must be positive, got {h}")));
    }
    let floor = excess_unchecked(h, h, ch);
    if !(limit > floor) {
        return Err(Error::NoCoverage { limit, floor });
    }
    let mut hi = 2.0 * h;
    while excess_unchecked(hi, h, ch) < limit {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Domain("coverage radius diverged".into()));
        }
    }
    bisect_root(|d| excess_unchecked(d, h, ch) - limit, h, hi, 1e-9 * hi * 0.5)
}

/// Horizontal radius of the ground disc where `F <= limit`; zero when only the
/// point directly below is covered, error when nothing is.
pub fn horizontal_reach(limit: f64, h: f64, ch: &ChannelParams) -> Result<f64> {
    let d = coverage_radius(limit, h, ch)?;
    Ok((d * d - h * h).max(0.0).sqrt())
}

/// `P_ut / (kappa0^2 rho)`: the largest `F` at which a device still harvests.
pub fn energy_limit(p_ut: f64, rho: f64, ch: &ChannelParams) -> f64 {
    p_ut / (ch.kappa0().powi(2) * rho)
}

/// Average gains of every (device, UAV) pair in both phases, K×N.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub dl: Vec<Vec<f64>>,
    pub ul: Vec<Vec<f64>>,
}

impl LinkGains {
    pub fn compute(
        devices: &[Vec2],
        dl_positions: &[Vec3],
        ul_positions: &[Vec3],
        ch: &ChannelParams,
    ) -> Result<Self> {
        let table = |uavs: &[Vec3]| -> Result<Vec<Vec<f64>>> {
            devices
                .iter()
                .map(|s| uavs.iter().map(|u| gain_between(u, s, ch)).collect())
                .collect()
        };
        Ok(LinkGains { dl: table(dl_positions)?, ul: table(ul_positions)? })
    }
}
