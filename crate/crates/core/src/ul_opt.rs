//! Uplink step: energy association, information association and collection positions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{energy_limit, excess_at_offset, LinkGains, QuadraticFit};
use crate::error::{Error, Result};
use crate::model::{
    AssociationState, BinaryMatrix, ChannelParams, Scenario, Schedule, SnrRegime, SolverCoefficients, Vec2, Vec3,
};
use crate::numerics::{dinkelbach_select, hungarian, maximize_over_discs, DiscConstraintSet, FractionalInstance};
use crate::placement::{self, PlacementOptions, PlacementOutcome, RatioModel, Reach, Region};

/// Coefficients of one collected device's ratio
/// `(phi1 v + phi2 b) / (rho1 D v + rho2 v + rho3 b)` with `v = (D - 1) b + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlRatioTerm {
    pub device: Vec2,
    /// Whether the device also harvests from this UAV during collection.
    pub energy_link: bool,
    pub phi1: f64,
    pub phi2: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// Largest `F` keeping the device's SNR (and energy link, if any) feasible.
    pub limit: f64,
}

impl UlRatioTerm {
    /// `v(b)` at path loss `d`.
    pub fn vb(&self, d: f64) -> f64 {
        if self.energy_link {
            d
        } else {
            1.0
        }
    }

    pub fn ratio(&self, d: f64) -> f64 {
        let (num, den) = self.parts(d);
        num / den
    }

    fn parts(&self, d: f64) -> (f64, f64) {
        if self.energy_link {
            (self.phi1 * d + self.phi2, (self.rho1 * d + self.rho2) * d + self.rho3)
        } else {
            (self.phi1, self.rho1 * d + self.rho2)
        }
    }

    /// Slack maximizing the transformed term.
    pub fn slack(&self, d: f64) -> f64 {
        let (num, den) = self.parts(d);
        num.sqrt() / den
    }

    /// `2 xi sqrt(num) - xi^2 den`.
    pub fn transformed(&self, d: f64, xi: f64) -> f64 {
        let (num, den) = self.parts(d);
        2.0 * xi * num.sqrt() - xi * xi * den
    }
}

/// Concave lower bound `c(u)` of `2 xi sqrt(phi1 D + phi2)` built on the quadratic fit,
/// evaluated at link distance `d`.
pub fn concave_lower_bound(phi1: f64, phi2: f64, xi: f64, kappa0: f64, fit: &QuadraticFit, d: f64) -> f64 {
    let a = (2.0 * phi1).sqrt() * kappa0 * (fit.k1 * d + fit.k2);
    let b = (2.0 * phi1 * kappa0 * kappa0 * fit.k3 + 2.0 * phi2).max(0.0).sqrt();
    xi * (a + b)
}

fn tag_device(e: Error, i: usize) -> Error {
    match e {
        Error::Coverage { .. } => Error::Coverage { device: i },
        e => e,
    }
}

/// Row-wise 0-1 fractional program choosing the uplink energy sources of each device.
pub fn ul_energy_associate(
    scn: &Scenario,
    gains: &LinkGains,
    coeff: &SolverCoefficients,
    regime: SnrRegime,
    ul_info: &BinaryMatrix,
) -> Result<BinaryMatrix> {
    let n = scn.uav_count;
    let mut rows = Vec::with_capacity(scn.device_count());
    for i in 0..scn.device_count() {
        let k = coeff.epoch[i];
        let feasible: Vec<bool> = (0..n).map(|j| scn.radio.p_ut * gains.ul[i][j] >= scn.radio.rho).collect();
        if k == 1 {
            let best = (0..n)
                .filter(|&j| feasible[j])
                .max_by(|&a, &b| gains.ul[i][a].total_cmp(&gains.ul[i][b]).then(b.cmp(&a)))
                .ok_or(Error::Coverage { device: i })?;
            rows.push((0..n).map(|j| j == best).collect());
            continue;
        }
        let inst = ul_energy_instance(scn, gains, coeff, regime, ul_info, i);
        rows.push(dinkelbach_select(&inst).map_err(|e| tag_device(e, i))?.selection);
    }
    Ok(rows)
}

/// Fractional instance for the uplink-energy row of device `i`.
pub fn ul_energy_instance(
    scn: &Scenario,
    gains: &LinkGains,
    coeff: &SolverCoefficients,
    regime: SnrRegime,
    ul_info: &BinaryMatrix,
    i: usize,
) -> FractionalInstance {
    let n = scn.uav_count;
    let j = ul_info[i].iter().position(|&a| a).unwrap_or(0);
    let k = coeff.epoch[i];
    let eps = coeff.epsilon[i];
    let loss = 1.0 / gains.ul[i][j];
    let beta: Vec<f64> = (0..n).map(|m| eps * (k - 1) as f64 * gains.ul[i][m]).collect();
    let mask = |m: usize, v: f64| if scn.radio.p_ut * gains.ul[i][m] < scn.radio.rho { f64::INFINITY } else { v };
    match regime {
        SnrRegime::Slack => {
            let lam = coeff.lambda_cap[i];
            FractionalInstance {
                a0: lam * loss + coeff.time.tau0,
                b0: 1.0,
                a: (0..n).map(|m| mask(m, lam * beta[m])).collect(),
                b: vec![0.0; n],
                min_ones: 1,
            }
        }
        SnrRegime::Binding => {
            let om = coeff.omega_cap[i];
            FractionalInstance {
                a0: om + loss,
                b0: om,
                a: (0..n).map(|m| mask(m, beta[m])).collect(),
                b: beta,
                min_ones: 1,
            }
        }
    }
}

/// How devices are matched to collecting UAVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfoAssignment {
    /// Best UAV per device; exact without capacities.
    PerDevice,
    /// Hungarian matching with at most `capacity` devices per UAV.
    Capacitated { capacity: usize },
}

/// Value of assigning device `i` to collector `j`, or `None` when its SNR cannot be met there.
pub fn info_score(
    gains: &LinkGains,
    coeff: &SolverCoefficients,
    regime: SnrRegime,
    epochs: &[usize],
    i: usize,
    j: usize,
) -> Option<f64> {
    let t = coeff.time;
    let eps = coeff.epsilon[i];
    let k = coeff.epoch[i];
    let l = epochs[j].max(1);
    let loss = 1.0 / gains.ul[i][j];
    if t.tau1 * coeff.gamma * loss / eps > coeff.chi(i, l, k) * (1.0 + 1e-12) {
        return None;
    }
    let beta = eps * (k - 1) as f64 * coeff.ul_gain_sum[i];
    let gd = coeff.dl_gain_sum[i];
    Some(match regime {
        SnrRegime::Slack => {
            let lam = t.tau1 / (eps * l as f64 * gd);
            1.0 / (lam * loss + lam * beta + t.tau0)
        }
        SnrRegime::Binding => {
            let (m, n) = coeff.argmax_pair;
            let base = (coeff.gamma - coeff.theta1[m] * (n - 1) as f64) / (coeff.theta0[m] * coeff.epochs[m] as f64);
            let om = eps * gd * l as f64 * base;
            (om + beta) / (om + beta + loss)
        }
    })
}

/// Assigns every device to one collecting UAV and returns the new `A` with its epoch counts.
pub fn ul_info_associate(
    scn: &Scenario,
    gains: &LinkGains,
    coeff: &SolverCoefficients,
    regime: SnrRegime,
    sched: &Schedule,
    variant: InfoAssignment,
) -> Result<(BinaryMatrix, Vec<usize>)> {
    let k_dev = scn.device_count();
    let n = scn.uav_count;
    let scores: Vec<Vec<Option<f64>>> = (0..k_dev)
        .map(|i| (0..n).map(|j| info_score(gains, coeff, regime, &sched.epochs_per_uav, i, j)).collect())
        .collect();
    let mut chosen = vec![0usize; k_dev];
    match variant {
        InfoAssignment::PerDevice => {
            for i in 0..k_dev {
                let mut best: Option<(f64, usize)> = None;
                for j in 0..n {
                    if let Some(s) = scores[i][j] {
                        if best.is_none_or(|b| s > b.0) {
                            best = Some((s, j));
                        }
                    }
                }
                chosen[i] = best.ok_or(Error::SnrInfeasible { device: i, epoch: coeff.epoch[i] })?.1;
            }
        }
        InfoAssignment::Capacitated { capacity } => {
            if capacity == 0 || capacity * n < k_dev {
                return Err(Error::Parameter(format!("capacity {capacity} cannot hold {k_dev} devices")));
            }
            let cost: Vec<Vec<f64>> = scores
                .iter()
                .map(|row| {
                    (0..n * capacity).map(|c| row[c / capacity].map_or(f64::INFINITY, |s| -s)).collect()
                })
                .collect();
            let a = hungarian(&cost)?;
            for i in 0..k_dev {
                let c = a.row_to_col[i].ok_or(Error::SnrInfeasible { device: i, epoch: coeff.epoch[i] })?;
                if !cost[i][c].is_finite() {
                    return Err(Error::SnrInfeasible { device: i, epoch: coeff.epoch[i] });
                }
                chosen[i] = c / capacity;
            }
        }
    }
    let a: BinaryMatrix = chosen.iter().map(|&c| (0..n).map(|j| j == c).collect()).collect();
    let mut counts = vec![0usize; n];
    for &c in &chosen {
        counts[c] += 1;
    }
    let epochs = counts.iter().map(|c| c.div_ceil(scn.channel_count)).collect();
    Ok((a, epochs))
}

/// Placement of one uplink UAV over the devices it collects from.
#[derive(Debug, Clone)]
pub struct UlPlacementProblem {
    pub channel: ChannelParams,
    pub terms: Vec<UlRatioTerm>,
    /// Devices of other collectors that harvest from this UAV, with their `F` limit.
    pub energy_only: Vec<Reach>,
    pub altitude_bounds: (f64, f64),
}

struct UlModel {
    terms: Vec<UlRatioTerm>,
    region: Region,
    k2: f64,
    kappa0: f64,
}

impl UlModel {
    fn loss(&self, t: &UlRatioTerm, p: &Vec3) -> f64 {
        self.k2 * excess_at_offset((p.xy() - t.device).norm(), p.z, &self.region.channel)
    }
}

impl RatioModel for UlModel {
    fn region(&self) -> &Region {
        &self.region
    }

    fn centers(&self) -> Vec<Vec2> {
        self.terms.iter().map(|t| t.device).collect()
    }

    fn value(&self, p: &Vec3) -> f64 {
        self.terms.iter().map(|t| t.ratio(self.loss(t, p))).sum()
    }

    fn slack(&self, p: &Vec3) -> Vec<f64> {
        self.terms.iter().map(|t| t.slack(self.loss(t, p))).collect()
    }

    fn transformed(&self, p: &Vec3, slack: &[f64]) -> f64 {
        self.terms.iter().zip(slack).map(|(t, &xi)| t.transformed(self.loss(t, p), xi)).sum()
    }

    fn planar_step(
        &self,
        p: &Vec3,
        slack: &[f64],
        fit: &QuadraticFit,
        discs: &DiscConstraintSet,
        opts: &PlacementOptions,
    ) -> Result<Vec2> {
        let h = p.z;
        let k2 = self.k2;
        let k0 = self.kappa0;
        let mut anchor = p.xy();
        for _ in 0..opts.cccp_max_iters.max(1) {
            // Linear part of U^a for every energy-linked term, frozen at the anchor.
            let lin: Vec<(f64, Vec2)> = self
                .terms
                .iter()
                .zip(slack)
                .map(|(t, &xi)| {
                    if !t.energy_link {
                        return (0.0, Vec2::zeros());
                    }
                    let off = anchor - t.device;
                    let d = (off.norm_squared() + h * h).sqrt();
                    let ua = concave_lower_bound(t.phi1, t.phi2, xi, k0, fit, d) - xi * xi * t.rho3;
                    let grad = off * (xi * (2.0 * t.phi1).sqrt() * k0 * fit.k1 / d);
                    (ua, grad)
                })
                .collect();
            let a0 = anchor;
            let obj = |u: &Vec2| {
                let mut v = 0.0;
                let mut g = Vec2::zeros();
                for ((t, &xi), (ua, ga)) in self.terms.iter().zip(slack).zip(&lin) {
                    let off = u - t.device;
                    let d = (off.norm_squared() + h * h).sqrt();
                    let q = fit.eval(d);
                    let dq = off * (fit.slope(d) / d);
                    if t.energy_link {
                        let ub = xi * xi * (t.rho1 * k2 * k2 * q * q + t.rho2 * k2 * q);
                        let dub = xi * xi * (2.0 * t.rho1 * k2 * k2 * q + t.rho2 * k2);
                        v += ua + ga.dot(&(u - a0)) - ub;
                        g += ga - dq * dub;
                    } else {
                        v += 2.0 * xi * t.phi1.sqrt() - xi * xi * (t.rho1 * k2 * q + t.rho2);
                        g -= dq * (xi * xi * t.rho1 * k2);
                    }
                }
                (v, g)
            };
            let next = maximize_over_discs(obj, discs, &anchor)?.point;
            let moved = (next - anchor).norm();
            anchor = next;
            if moved < opts.cccp_tol {
                break;
            }
        }
        Ok(anchor)
    }
}

impl UlPlacementProblem {
    fn model(&self) -> UlModel {
        let mut reaches: Vec<Reach> = self.terms.iter().map(|t| Reach { center: t.device, limit: t.limit }).collect();
        reaches.extend(self.energy_only.iter().copied());
        UlModel {
            terms: self.terms.clone(),
            region: Region { reaches, channel: self.channel, bounds: self.altitude_bounds },
            k2: self.channel.kappa0().powi(2),
            kappa0: self.channel.kappa0(),
        }
    }

    pub fn value(&self, p: &Vec3) -> f64 {
        self.model().value(p)
    }

    pub fn feasible(&self, p: &Vec3) -> bool {
        self.model().region.feasible(p)
    }

    pub fn slack(&self, p: &Vec3) -> Vec<f64> {
        self.model().slack(p)
    }

    pub fn transformed(&self, p: &Vec3, slack: &[f64]) -> f64 {
        self.model().transformed(p, slack)
    }

    pub fn solve(&self, init: &Vec3, uav: usize, opts: &PlacementOptions) -> Result<PlacementOutcome> {
        let model = self.model();
        if model.terms.is_empty() {
            return Ok(PlacementOutcome {
                position: *init,
                value: 0.0,
                initial_value: 0.0,
                slack: Vec::new(),
                trace: vec![0.0],
            });
        }
        placement::solve(&model, init, uav, opts)
    }
}

/// Largest `F` from uplink UAV `j` at which device `i` still meets its SNR threshold.
pub fn snr_limit(
    scn: &Scenario,
    gains: &LinkGains,
    coeff: &SolverCoefficients,
    ul_energy: &BinaryMatrix,
    i: usize,
    j: usize,
) -> f64 {
    let t = coeff.time;
    let eps = coeff.epsilon[i];
    let k = coeff.epoch[i];
    let l = coeff.epochs[i] as f64;
    let others: f64 = (0..scn.uav_count).filter(|&n| n != j && ul_energy[i][n]).map(|n| gains.ul[i][n]).sum();
    let a = if ul_energy[i][j] { eps * (k - 1) as f64 } else { 0.0 };
    let b = eps / t.tau1 * (l * t.tau0 * coeff.dl_gain_sum[i] + (k - 1) as f64 * t.tau1 * others);
    let g_min = 2.0 * coeff.gamma / (b + (b * b + 4.0 * a * coeff.gamma).sqrt());
    1.0 / (scn.channel.kappa0().powi(2) * g_min)
}

/// Builds the placement problem of uplink UAV `uav`.
pub fn ul_problem(
    scn: &Scenario,
    gains: &LinkGains,
    assoc: &AssociationState,
    coeff: &SolverCoefficients,
    regime: SnrRegime,
    uav: usize,
) -> UlPlacementProblem {
    let eh = energy_limit(scn.radio.p_ut, scn.radio.rho, &scn.channel);
    let t = coeff.time;
    let mut terms = Vec::new();
    let mut energy_only = Vec::new();
    for i in 0..scn.device_count() {
        let b = assoc.ul_energy[i][uav];
        if !assoc.ul_info[i][uav] {
            if b {
                energy_only.push(Reach { center: scn.devices[i], limit: eh });
            }
            continue;
        }
        let k = coeff.epoch[i];
        let eps = coeff.epsilon[i];
        let iota = coeff.iota[i];
        let (phi1, phi2, rho1, rho2, rho3) = match regime {
            SnrRegime::Slack => {
                let lam = coeff.lambda_cap[i];
                (1.0, 0.0, lam, lam * iota + t.tau0, eps * lam * (k - 1) as f64)
            }
            SnrRegime::Binding => {
                let p1 = iota + coeff.omega_cap[i];
                let p2 = eps * (k - 1) as f64;
                (p1, p2, 1.0, p1, p2)
            }
        };
        let mut limit = snr_limit(scn, gains, coeff, &assoc.ul_energy, i, uav);
        if b {
            limit = limit.min(eh);
        }
        terms.push(UlRatioTerm { device: scn.devices[i], energy_link: b, phi1, phi2, rho1, rho2, rho3, limit });
    }
    UlPlacementProblem { channel: scn.channel, terms, energy_only, altitude_bounds: scn.altitude_bounds }
}

/// Placement of uplink UAV `uav` starting from `init`.
#[allow(clippy::too_many_arguments)]
pub fn ul_place(
    scn: &Scenario,
    gains: &LinkGains,
    assoc: &AssociationState,
    coeff: &SolverCoefficients,
    sched: &Schedule,
    uav: usize,
    init: &Vec3,
    opts: &PlacementOptions,
) -> Result<PlacementOutcome> {
    if sched.epoch != coeff.epoch {
        return Err(Error::State("coefficients were computed for another schedule".into()));
    }
    ul_problem(scn, gains, assoc, coeff, coeff.regime(), uav).solve(init, uav, opts)
}

/// Places every uplink UAV in parallel.
pub fn ul_place_all(
    scn: &Scenario,
    gains: &LinkGains,
    assoc: &AssociationState,
    coeff: &SolverCoefficients,
    regime: SnrRegime,
    positions: &[Vec3],
    opts: &PlacementOptions,
) -> Vec<Result<PlacementOutcome>> {
    (0..scn.uav_count)
        .into_par_iter()
        .map(|j| {
            let o = PlacementOptions { seed: opts.seed.wrapping_add(1000 + j as u64), ..*opts };
            ul_problem(scn, gains, assoc, coeff, regime, j).solve(&positions[j], j, &o)
        })
        .collect()
}
