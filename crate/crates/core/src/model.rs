//! Domain types shared by every stage of the optimizer, and the scenario generator.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Row-major K×N binary matrix.
pub type BinaryMatrix = Vec<Vec<bool>>;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `0 dBm` is one milliwatt.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Constants of the probabilistic air-to-ground channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub beta: f64,
    pub psi: f64,
    /// Hz.
    pub carrier_freq: f64,
    /// m/s.
    pub light_speed: f64,
    pub path_exponent: f64,
    /// Linear excess loss of line-of-sight links.
    pub mu_los: f64,
    /// Linear excess loss of non-line-of-sight links.
    pub mu_nlos: f64,
}

impl ChannelParams {
    /// Urban environment at 2 GHz with 3 dB / 23 dB excess losses.
    pub fn urban() -> Self {
        ChannelParams {
            beta: 11.95,
            psi: 0.14,
            carrier_freq: 2e9,
            light_speed: 299_792_458.0,
            path_exponent: 2.0,
            mu_los: db_to_linear(3.0),
            mu_nlos: db_to_linear(23.0),
        }
    }

    /// A channel whose links are always line-of-sight (`beta = 0`).
    pub fn pure_los(mu_los: f64) -> Self {
        ChannelParams { beta: 0.0, mu_los, mu_nlos: mu_los * 100.0, ..Self::urban() }
    }

    /// Free-space constant `4π f_c / c`, in 1/m.
    pub fn kappa0(&self) -> f64 {
        4.0 * PI * self.carrier_freq / self.light_speed
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.beta,
            self.psi,
            self.carrier_freq,
            self.light_speed,
            self.path_exponent,
            self.mu_los,
            self.mu_nlos,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Parameter("channel constants must be finite".into()));
        }
        if !(self.mu_nlos > self.mu_los && self.mu_los > 1.0) {
            return Err(Error::Parameter(format!(
                "need mu_nlos > mu_los > 1, got mu_los = {}, mu_nlos = {}",
                self.mu_los, self.mu_nlos
            )));
        }
        if self.beta < 0.0 || self.psi < 0.0 {
            return Err(Error::Parameter("beta and psi must be non-negative".into()));
        }
        if self.carrier_freq <= 0.0 || self.light_speed <= 0.0 {
            return Err(Error::Parameter("carrier frequency and light speed must be positive".into()));
        }
        if self.path_exponent != 2.0 {
            return Err(Error::Parameter(format!(
                "path exponent must be 2, got {}",
                self.path_exponent
            )));
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::urban()
    }
}

/// Radio and energy-harvesting constants. Powers are in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// UAV transmit power.
    pub p_ut: f64,
    /// Product of harvesting efficiency and the usable fraction of the harvested energy.
    pub eh_eff: f64,
    /// Minimum received power a device can harvest from.
    pub rho: f64,
    /// Linear SNR threshold.
    pub gamma: f64,
    pub noise_power: f64,
}

impl RadioParams {
    /// Builds radio constants from the logarithmic units used in configuration files.
    pub fn from_dbm(p_ut_dbm: f64, rho_dbm: f64, gamma_db: f64, noise_dbm: f64, eh_eff: f64) -> Self {
        RadioParams {
            p_ut: dbm_to_watts(p_ut_dbm),
            eh_eff,
            rho: dbm_to_watts(rho_dbm),
            gamma: db_to_linear(gamma_db),
            noise_power: dbm_to_watts(noise_dbm),
        }
    }

    /// Defaults with `rho = -18 dBm`, `gamma = 5 dB`, `N0 = -120 dBm`, efficiency 0.5.
    pub fn with_power_dbm(p_ut_dbm: f64) -> Self {
        Self::from_dbm(p_ut_dbm, -18.0, 5.0, -120.0, 0.5)
    }

    /// `eh_eff * p_ut / noise_power`, identical for every device.
    pub fn epsilon(&self) -> f64 {
        self.eh_eff * self.p_ut / self.noise_power
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.p_ut, self.eh_eff, self.rho, self.gamma, self.noise_power];
        if !all.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Parameter("radio constants must be finite and positive".into()));
        }
        if self.eh_eff > 1.0 {
            return Err(Error::Parameter(format!("eh_eff must be in (0, 1], got {}", self.eh_eff)));
        }
        Ok(())
    }
}

fn default_hover_time() -> f64 {
    1.0
}

fn default_altitude_bounds() -> (f64, f64) {
    (1.0, 150.0)
}

/// The world being optimized: ground devices, swarm size and radio environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub uav_count: usize,
    pub channel_count: usize,
    /// Radius of the service region centred at the origin, meters.
    pub region_radius: f64,
    #[serde(default = "default_hover_time")]
    pub hover_time: f64,
    #[serde(default = "default_altitude_bounds")]
    pub altitude_bounds: (f64, f64),
    pub seed: u64,
    pub channel: ChannelParams,
    pub radio: RadioParams,
    /// Ground positions `[x, y]` in meters; every device sits at `z = 0`.
    pub devices: Vec<Vec2>,
}

impl Scenario {
    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn device3(&self, i: usize) -> Vec3 {
        let p = self.devices[i];
        Vec3::new(p.x, p.y, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.devices.is_empty() {
            return Err(Error::Parameter("scenario has no devices".into()));
        }
        if self.uav_count == 0 || self.channel_count == 0 {
            return Err(Error::Parameter("uav_count and channel_count must be at least 1".into()));
        }
        if !(self.hover_time > 0.0) {
            return Err(Error::Parameter("hover_time must be positive".into()));
        }
        let (lo, hi) = self.altitude_bounds;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Parameter(format!("bad altitude bounds [{lo}, {hi}]")));
        }
        if self.devices.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::Parameter("device positions must be finite".into()));
        }
        self.channel.validate()?;
        self.radio.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parameter(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Scenario> {
        let scn: Scenario = toml::from_str(text).map_err(|e| Error::Parameter(e.to_string()))?;
        scn.validate()?;
        Ok(scn)
    }
}

/// Generator parameters for a random scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub devices: usize,
    pub radius: f64,
    pub uav_count: usize,
    pub channel_count: usize,
    pub seed: u64,
    pub channel: ChannelParams,
    pub radio: RadioParams,
    #[serde(default = "default_altitude_bounds")]
    pub altitude_bounds: (f64, f64),
}

impl ScenarioSpec {
    /// `k` devices in an 80 m disc, 4 UAVs and 12 subcarriers.
    pub fn urban_disc(k: usize, p_ut_dbm: f64, seed: u64) -> Self {
        ScenarioSpec {
            devices: k,
            radius: 80.0,
            uav_count: 4,
            channel_count: 12,
            seed,
            channel: ChannelParams::urban(),
            radio: RadioParams::with_power_dbm(p_ut_dbm),
            altitude_bounds: default_altitude_bounds(),
        }
    }
}

/// Draws `spec.devices` points uniformly over the disc of radius `spec.radius`.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    if spec.devices == 0 {
        return Err(Error::Parameter("device count must be at least 1".into()));
    }
    if !(spec.radius > 0.0 && spec.radius.is_finite()) {
        return Err(Error::Parameter(format!("radius must be positive, got {}", spec.radius)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let devices = (0..spec.devices)
        .map(|_| {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            let r = spec.radius * u.sqrt();
            let t = 2.0 * PI * v;
            Vec2::new(r * t.cos(), r * t.sin())
        })
        .collect();
    let scn = Scenario {
        uav_count: spec.uav_count,
        channel_count: spec.channel_count,
        region_radius: spec.radius,
        hover_time: 1.0,
        altitude_bounds: spec.altitude_bounds,
        seed: spec.seed,
        channel: spec.channel,
        radio: spec.radio,
        devices,
    };
    scn.validate()?;
    Ok(scn)
}

/// Downlink and uplink positions of every UAV plus the placement slacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub dl_positions: Vec<Vec3>,
    pub ul_positions: Vec<Vec3>,
    /// K×N, slack of device `i` in the placement of downlink UAV `j`; zero when not served.
    pub dl_slack: Vec<Vec<f64>>,
    /// K×N, same for the uplink placement.
    pub ul_slack: Vec<Vec<f64>>,
}

impl Deployment {
    pub fn new(dl_positions: Vec<Vec3>, ul_positions: Vec<Vec3>, devices: usize) -> Self {
        let n = dl_positions.len();
        Deployment {
            dl_positions,
            ul_positions,
            dl_slack: vec![vec![0.0; n]; devices],
            ul_slack: vec![vec![0.0; n]; devices],
        }
    }

    pub fn uav_count(&self) -> usize {
        self.dl_positions.len()
    }

    pub fn validate(&self, scn: &Scenario) -> Result<()> {
        let n = scn.uav_count;
        if self.dl_positions.len() != n || self.ul_positions.len() != n {
            return Err(Error::State(format!("deployment must hold {n} UAV positions per phase")));
        }
        let (lo, hi) = scn.altitude_bounds;
        let tol = 1e-9 * hi;
        for p in self.dl_positions.iter().chain(&self.ul_positions) {
            if !(p.z >= lo - tol && p.z <= hi + tol) || !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::State(format!("UAV position {p:?} outside altitude bounds")));
            }
        }
        if self.dl_slack.iter().chain(&self.ul_slack).flatten().any(|s| !(*s >= 0.0)) {
            return Err(Error::State("negative placement slack".into()));
        }
        Ok(())
    }
}

/// Downlink energy (`I`), uplink information (`A`) and uplink energy (`B`) associations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationState {
    pub dl_energy: BinaryMatrix,
    pub ul_info: BinaryMatrix,
    pub ul_energy: BinaryMatrix,
}

impl AssociationState {
    pub fn device_count(&self) -> usize {
        self.ul_info.len()
    }

    pub fn uav_count(&self) -> usize {
        self.ul_info.first().map_or(0, |r| r.len())
    }

    /// The uplink UAV collecting device `i`'s data.
    pub fn collector(&self, i: usize) -> usize {
        self.ul_info[i].iter().position(|&a| a).expect("every device has a collector")
    }

    /// Devices whose data UAV `j` collects, in index order.
    pub fn collected_by(&self, j: usize) -> Vec<usize> {
        (0..self.device_count()).filter(|&i| self.ul_info[i][j]).collect()
    }

    /// Devices charged by downlink UAV `j`.
    pub fn charged_by(&self, j: usize) -> Vec<usize> {
        (0..self.device_count()).filter(|&i| self.dl_energy[i][j]).collect()
    }

    /// Uplink UAVs device `i` harvests from.
    pub fn ul_sources(&self, i: usize) -> Vec<usize> {
        (0..self.uav_count()).filter(|&j| self.ul_energy[i][j]).collect()
    }

    /// Downlink UAVs device `i` harvests from.
    pub fn dl_sources(&self, i: usize) -> Vec<usize> {
        (0..self.uav_count()).filter(|&j| self.dl_energy[i][j]).collect()
    }

    pub fn collected_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.uav_count()];
        for row in &self.ul_info {
            for (j, &a) in row.iter().enumerate() {
                if a {
                    c[j] += 1;
                }
            }
        }
        c
    }

    pub fn validate(&self, k: usize, n: usize) -> Result<()> {
        for (name, m) in [("I", &self.dl_energy), ("A", &self.ul_info), ("B", &self.ul_energy)] {
            if m.len() != k || m.iter().any(|r| r.len() != n) {
                return Err(Error::State(format!("association {name} must be {k}x{n}")));
            }
        }
        for i in 0..k {
            if !self.dl_energy[i].iter().any(|&x| x) {
                return Err(Error::State(format!("device {i} has no downlink energy source")));
            }
            if !self.ul_energy[i].iter().any(|&x| x) {
                return Err(Error::State(format!("device {i} has no uplink energy source")));
            }
            if self.ul_info[i].iter().filter(|&&x| x).count() != 1 {
                return Err(Error::State(format!("device {i} must have exactly one collector")));
            }
        }
        Ok(())
    }
}

/// Epoch membership. Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    /// Epoch of each device, in `1..=L` of its collector.
    pub epoch: Vec<usize>,
    /// `ceil(C_j / M)` for every uplink UAV.
    pub epochs_per_uav: Vec<usize>,
}

impl Schedule {
    pub fn max_epochs(&self) -> usize {
        self.epochs_per_uav.iter().copied().max().unwrap_or(0)
    }

    /// The binary matrix `s[i][k-1]`.
    pub fn indicator(&self) -> BinaryMatrix {
        let l = self.max_epochs();
        self.epoch
            .iter()
            .map(|&k| (1..=l).map(|e| e == k).collect())
            .collect()
    }

    /// Devices of UAV `j` scheduled at epoch `k`.
    pub fn members(&self, assoc: &AssociationState, j: usize, k: usize) -> Vec<usize> {
        assoc.collected_by(j).into_iter().filter(|&i| self.epoch[i] == k).collect()
    }

    pub fn validate(&self, assoc: &AssociationState, m: usize) -> Result<()> {
        let k_dev = assoc.device_count();
        if self.epoch.len() != k_dev || self.epochs_per_uav.len() != assoc.uav_count() {
            return Err(Error::State("schedule dimensions do not match associations".into()));
        }
        let counts = assoc.collected_counts();
        for (j, &c) in counts.iter().enumerate() {
            let l = self.epochs_per_uav[j];
            if l != c.div_ceil(m) {
                return Err(Error::State(format!("UAV {j} has {c} devices but {l} epochs")));
            }
            let mut per_epoch = vec![0usize; l];
            for i in assoc.collected_by(j) {
                let k = self.epoch[i];
                if k == 0 || k > l {
                    return Err(Error::State(format!("device {i} scheduled at epoch {k} of {l}")));
                }
                per_epoch[k - 1] += 1;
            }
            if per_epoch.iter().any(|&n| n > m) {
                return Err(Error::State(format!("UAV {j} has an epoch with more than {m} devices")));
            }
        }
        Ok(())
    }
}

/// Fractions of the hovering block spent on charging and on data collection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAllocation {
    pub tau0: f64,
    pub tau1: f64,
}

impl TimeAllocation {
    pub fn equal() -> Self {
        TimeAllocation { tau0: 0.5, tau1: 0.5 }
    }

    pub fn validate(&self, hover_time: f64) -> Result<()> {
        if !(self.tau0 > 0.0 && self.tau1 > 0.0 && self.tau0 + self.tau1 <= hover_time * (1.0 + 1e-12)) {
            return Err(Error::State(format!("invalid time allocation {self:?}")));
        }
        Ok(())
    }
}

/// Which side of the SNR case split the current time allocation is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnrRegime {
    /// Every SNR constraint is slack (`varpi < 1`).
    Slack,
    /// The worst SNR constraint binds (`varpi >= 1`).
    Binding,
}

impl SnrRegime {
    pub fn of(varpi: f64) -> Self {
        if varpi < 1.0 {
            SnrRegime::Slack
        } else {
            SnrRegime::Binding
        }
    }
}

/// Per-device coefficients derived from the current gains, schedule and time split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverCoefficients {
    pub epsilon: Vec<f64>,
    pub gamma: f64,
    pub hover_time: f64,
    pub time: TimeAllocation,
    /// Scheduled epoch of each device.
    pub epoch: Vec<usize>,
    /// Epoch count `L` of each device's collector.
    pub epochs: Vec<usize>,
    /// Gain to the collecting UAV.
    pub collector_gain: Vec<f64>,
    /// Sum of downlink gains over the device's downlink sources.
    pub dl_gain_sum: Vec<f64>,
    /// Sum of uplink gains over the device's uplink sources.
    pub ul_gain_sum: Vec<f64>,
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    pub phi: Vec<f64>,
    pub gamma_cap: Vec<f64>,
    pub lambda_cap: Vec<f64>,
    pub omega_cap: Vec<f64>,
    /// `iota` at the scheduled epoch, excluding the collector's own contribution.
    pub iota: Vec<f64>,
    /// `w[i][k-1]` for `k` in `1..=L_i`.
    pub w: BinaryMatrix,
    pub varpi: f64,
    /// Device and epoch attaining `varpi`.
    pub argmax_pair: (usize, usize),
}

impl SolverCoefficients {
    pub fn regime(&self) -> SnrRegime {
        SnrRegime::of(self.varpi)
    }

    /// `chi = L tau0 G^D + (k-1) tau1 G^U` for device `i` served by a UAV with `l` epochs.
    pub fn chi(&self, i: usize, l: usize, k: usize) -> f64 {
        let t = self.time;
        l as f64 * t.tau0 * self.dl_gain_sum[i] + (k - 1) as f64 * t.tau1 * self.ul_gain_sum[i]
    }
}

/// Pass/fail of every constraint family, checked independently of the solvers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintDiagnostics {
    /// (device, UAV) downlink links in use whose received power is below the threshold.
    pub dl_energy_violations: Vec<(usize, usize)>,
    /// Same for uplink energy links.
    pub ul_energy_violations: Vec<(usize, usize)>,
    /// Devices whose SNR is below the threshold.
    pub snr_violations: Vec<usize>,
    pub associations_valid: bool,
    pub schedule_valid: bool,
    pub time_valid: bool,
    pub altitudes_valid: bool,
}

impl ConstraintDiagnostics {
    pub fn all_satisfied(&self) -> bool {
        self.dl_energy_violations.is_empty()
            && self.ul_energy_violations.is_empty()
            && self.snr_violations.is_empty()
            && self.associations_valid
            && self.schedule_valid
            && self.time_valid
            && self.altitudes_valid
    }
}

/// Throughput evaluation of a complete solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    /// Achievable rate at the scheduled epoch, nats/s/Hz.
    pub per_device_rate: Vec<f64>,
    /// Rate times the epoch length; zero for devices below the SNR threshold.
    pub per_device_throughput: Vec<f64>,
    pub sum_throughput: f64,
    /// `None` when every throughput is zero.
    pub jain: Option<f64>,
    /// Sum throughput after every outer iteration.
    pub trace: Vec<f64>,
    pub feasibility: ConstraintDiagnostics,
}
