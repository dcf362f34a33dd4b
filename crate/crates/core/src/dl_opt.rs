//! Downlink step: energy association and charging positions.

use rayon::prelude::*;

use crate::channel::{energy_limit, excess_at_offset, LinkGains, QuadraticFit};
use crate::error::{Error, Result};
use crate::model::{
    AssociationState, BinaryMatrix, ChannelParams, Scenario, Schedule, SnrRegime, SolverCoefficients, Vec2, Vec3,
};
use crate::numerics::{dinkelbach_select, maximize_over_discs, DiscConstraintSet, FractionalInstance};
use crate::placement::{self, PlacementOptions, PlacementOutcome, RatioModel, Reach, Region};

/// Coefficients of one device's ratio `alpha3 / (alpha1 D + alpha2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioTerm {
    pub device: Vec2,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl RatioTerm {
    /// Ratio term of device `i` in the given regime.
    pub fn for_device(scn: &Scenario, coeff: &SolverCoefficients, regime: SnrRegime, i: usize) -> Self {
        let k = coeff.epoch[i];
        let c = 1.0 + coeff.theta1[i] * (k - 1) as f64;
        let (alpha1, alpha2, alpha3) = match regime {
            SnrRegime::Slack => (coeff.phi[i] * c, coeff.time.tau0, 1.0),
            SnrRegime::Binding => (c, coeff.gamma_cap[i], coeff.gamma_cap[i] / c),
        };
        RatioTerm { device: scn.devices[i], alpha1, alpha2, alpha3 }
    }
}

/// Row-wise 0-1 fractional program choosing which downlink UAVs charge each device.
pub fn dl_associate(
    scn: &Scenario,
    gains: &LinkGains,
    coeff: &SolverCoefficients,
    regime: SnrRegime,
) -> Result<BinaryMatrix> {
    let t = coeff.time;
    let mut rows = Vec::with_capacity(scn.device_count());
    for i in 0..scn.device_count() {
        let inst = dl_instance(scn, gains, coeff, regime, i, t.tau0, t.tau1);
        let sol = dinkelbach_select(&inst).map_err(|e| match e {
            Error::Coverage { .. } => Error::Coverage { device: i },
            e => e,
        })?;
        rows.push(sol.selection);
    }
    Ok(rows)
}

/// Fractional instance for the downlink row of device `i`.
pub fn dl_instance(
    scn: &Scenario,
    gains: &LinkGains,
    coeff: &SolverCoefficients,
    regime: SnrRegime,
    i: usize,
    tau0: f64,
    tau1: f64,
) -> FractionalInstance {
    let k = coeff.epoch[i];
    let c = 1.0 + coeff.theta1[i] * (k - 1) as f64;
    let head = coeff.phi[i] * c;
    let n = scn.uav_count;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for j in 0..n {
        let g = gains.dl[i][j];
        let (aj, bj) = match regime {
            SnrRegime::Slack => (-tau1 * g, tau0 * g),
            SnrRegime::Binding => (0.0, coeff.gamma_cap[i] * g),
        };
        a[j] = if scn.radio.p_ut * g < scn.radio.rho { f64::INFINITY } else { aj };
        b[j] = bj;
    }
    let (a0, b0) = match regime {
        SnrRegime::Slack => (head, head),
        SnrRegime::Binding => (1.0, head),
    };
    FractionalInstance { a0, b0, a, b, min_ones: 1 }
}

/// Placement of one downlink UAV over the devices it charges.
#[derive(Debug, Clone)]
pub struct DlPlacementProblem {
    pub channel: ChannelParams,
    pub terms: Vec<RatioTerm>,
    /// Largest `F` allowed to every served device.
    pub energy_limit: f64,
    pub altitude_bounds: (f64, f64),
}

struct DlModel {
    terms: Vec<RatioTerm>,
    region: Region,
    k2: f64,
}

impl DlModel {
    fn loss(&self, t: &RatioTerm, p: &Vec3) -> f64 {
        self.k2 * excess_at_offset((p.xy() - t.device).norm(), p.z, &self.region.channel)
    }
}

impl RatioModel for DlModel {
    fn region(&self) -> &Region {
        &self.region
    }

    fn centers(&self) -> Vec<Vec2> {
        self.terms.iter().map(|t| t.device).collect()
    }

    fn value(&self, p: &Vec3) -> f64 {
        self.terms.iter().map(|t| t.alpha3 / (t.alpha1 * self.loss(t, p) + t.alpha2)).sum()
    }

    fn slack(&self, p: &Vec3) -> Vec<f64> {
        self.terms.iter().map(|t| t.alpha3.sqrt() / (t.alpha1 * self.loss(t, p) + t.alpha2)).collect()
    }

    fn transformed(&self, p: &Vec3, slack: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(slack)
            .map(|(t, s)| 2.0 * s * t.alpha3.sqrt() - s * s * (t.alpha1 * self.loss(t, p) + t.alpha2))
            .sum()
    }

    fn planar_step(
        &self,
        p: &Vec3,
        slack: &[f64],
        fit: &QuadraticFit,
        discs: &DiscConstraintSet,
        _opts: &PlacementOptions,
    ) -> Result<Vec2> {
        let h = p.z;
        let obj = |u: &Vec2| {
            let mut v = 0.0;
            let mut g = Vec2::zeros();
            for (t, s) in self.terms.iter().zip(slack) {
                let off = u - t.device;
                let d = (off.norm_squared() + h * h).sqrt();
                let w = s * s * t.alpha1 * self.k2;
                v += 2.0 * s * t.alpha3.sqrt() - s * s * t.alpha2 - w * fit.eval(d);
                g -= off * (w * fit.slope(d) / d);
            }
            (v, g)
        };
        Ok(maximize_over_discs(obj, discs, &p.xy())?.point)
    }
}

impl DlPlacementProblem {
    fn model(&self) -> DlModel {
        let reaches = self.terms.iter().map(|t| Reach { center: t.device, limit: self.energy_limit }).collect();
        DlModel {
            terms: self.terms.clone(),
            region: Region { reaches, channel: self.channel, bounds: self.altitude_bounds },
            k2: self.channel.kappa0().powi(2),
        }
    }

    /// Exact sum of ratios at `p`.
    pub fn value(&self, p: &Vec3) -> f64 {
        self.model().value(p)
    }

    /// Whether every served device can harvest at `p`.
    pub fn feasible(&self, p: &Vec3) -> bool {
        self.model().region.feasible(p)
    }

    /// Optimal slack of every term at `p`.
    pub fn slack(&self, p: &Vec3) -> Vec<f64> {
        self.model().slack(p)
    }

    /// Quadratic-transform objective at fixed slacks.
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

/// Builds the placement problem of downlink UAV `uav`.
pub fn dl_problem(
    scn: &Scenario,
    assoc: &AssociationState,
    coeff: &SolverCoefficients,
    regime: SnrRegime,
    uav: usize,
) -> DlPlacementProblem {
    let terms = assoc.charged_by(uav).into_iter().map(|i| RatioTerm::for_device(scn, coeff, regime, i)).collect();
    DlPlacementProblem {
        channel: scn.channel,
        terms,
        energy_limit: energy_limit(scn.radio.p_ut, scn.radio.rho, &scn.channel),
        altitude_bounds: scn.altitude_bounds,
    }
}

/// Placement of downlink UAV `uav` starting from `init`.
pub fn dl_place(
    scn: &Scenario,
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
    dl_problem(scn, assoc, coeff, coeff.regime(), uav).solve(init, uav, opts)
}

/// Places every downlink UAV in parallel.
pub fn dl_place_all(
    scn: &Scenario,
    assoc: &AssociationState,
    coeff: &SolverCoefficients,
    regime: SnrRegime,
    positions: &[Vec3],
    opts: &PlacementOptions,
) -> Vec<Result<PlacementOutcome>> {
    (0..scn.uav_count)
        .into_par_iter()
        .map(|j| {
            let o = PlacementOptions { seed: opts.seed.wrapping_add(j as u64), ..*opts };
            dl_problem(scn, assoc, coeff, regime, j).solve(&positions[j], j, &o)
        })
        .collect()
}
