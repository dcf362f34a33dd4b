//! Experiment sweeps over the optimizer: configuration, the run grid and result files.

use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};
use uavdeploy::model::{generate_scenario, ChannelParams, RadioParams, Scenario, ScenarioSpec};
use uavdeploy::{run, Access, Error, Infrastructure, RunOptions, SchedulingPolicy, TimeMode};

/// Scheduling policy as written in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Optimal,
    Nf,
    Ff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Time {
    Ota,
    Eta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Infra {
    Uav,
    Bs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AccessMode {
    Ofdma,
    Tdma,
}

macro_rules! display_lower {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", format!("{self:?}").to_lowercase())
            }
        }
    )*};
}
display_lower!(Policy, Time, Infra, AccessMode);

/// Generator parameters in configuration units (dBm, dB, meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub devices: usize,
    pub uavs: usize,
    pub channels: usize,
    pub radius: f64,
    pub p_ut_dbm: f64,
    pub rho_dbm: f64,
    pub gamma_db: f64,
    pub noise_dbm: f64,
    pub eh_efficiency: f64,
    pub altitude_min: f64,
    pub altitude_max: f64,
    /// Explicit scenario file; when set the device positions come from it and
    /// `devices` and `radius` are ignored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            devices: 40,
            uavs: 2,
            channels: 6,
            radius: 80.0,
            p_ut_dbm: 120.0,
            rho_dbm: -18.0,
            gamma_db: 5.0,
            noise_dbm: -120.0,
            eh_efficiency: 0.5,
            altitude_min: 1.0,
            altitude_max: 150.0,
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Modes {
    pub policy: Vec<Policy>,
    pub time: Vec<Time>,
    pub infra: Vec<Infra>,
    pub access: Vec<AccessMode>,
}

impl Default for Modes {
    fn default() -> Self {
        Modes { policy: vec![Policy::Optimal], time: vec![Time::Ota], infra: vec![Infra::Uav], access: vec![AccessMode::Ofdma] }
    }
}

/// Inclusive range `lo, lo + step, ..., hi` over one scenario parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub name: String,
    pub lo: f64,
    pub step: f64,
    pub hi: f64,
}

pub const SWEEPABLE: [&str; 8] =
    ["p_ut_dbm", "rho_dbm", "gamma_db", "noise_dbm", "devices", "uavs", "channels", "radius"];

impl Sweep {
    /// Parses `NAME=LO:STEP:HI`.
    pub fn parse(text: &str) -> Result<Sweep, String> {
        let (name, range) = text.split_once('=').ok_or("expected NAME=LO:STEP:HI")?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err("expected NAME=LO:STEP:HI".into());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
        let sweep = Sweep { name: name.trim().to_string(), lo: num(parts[0])?, step: num(parts[1])?, hi: num(parts[2])? };
        sweep.values().map_err(|e| e.to_string())?;
        Ok(sweep)
    }

    pub fn values(&self) -> uavdeploy::Result<Vec<f64>> {
        if !SWEEPABLE.contains(&self.name.as_str()) {
            return Err(Error::Parameter(format!("sweep: unknown parameter {:?}, expected one of {SWEEPABLE:?}", self.name)));
        }
        if !(self.step > 0.0) || !(self.hi >= self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Parameter(format!("sweep: empty range {}:{}:{}", self.lo, self.step, self.hi)));
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        if n > 100_000 {
            return Err(Error::Parameter("sweep: more than 100000 points".into()));
        }
        Ok((0..=n).map(|s| self.lo + s as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub eps: f64,
    pub max_iters: usize,
    pub init_altitude: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = RunOptions::default();
        SolverConfig { eps: d.eps, max_iters: d.max_iters, init_altitude: d.init_altitude }
    }
}

/// Everything one invocation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    /// Seed of the first ensemble member; member `e` uses `seed + e`.
    pub seed: u64,
    pub ensemble: usize,
    pub scenario: ScenarioConfig,
    pub modes: Modes,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    pub solver: SolverConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            seed: 0,
            ensemble: 1,
            scenario: ScenarioConfig::default(),
            modes: Modes::default(),
            sweep: None,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> uavdeploy::Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Parameter(format!("config: {e}")))?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> uavdeploy::Result<()> {
        if self.ensemble == 0 {
            return Err(Error::Parameter("ensemble must be at least 1".into()));
        }
        let m = &self.modes;
        if m.policy.is_empty() || m.time.is_empty() || m.infra.is_empty() || m.access.is_empty() {
            return Err(Error::Parameter("modes: every mode list needs at least one entry".into()));
        }
        if let Some(s) = &self.sweep {
            s.values()?;
        }
        Ok(())
    }

    fn sweep_values(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.values().expect("validated").into_iter().map(Some).collect(),
            None => vec![None],
        }
    }
}

/// Scenario config with one parameter replaced by a sweep value.
fn apply_sweep(cfg: &ScenarioConfig, name: &str, v: f64) -> uavdeploy::Result<ScenarioConfig> {
    let mut c = cfg.clone();
    let count = |v: f64| -> uavdeploy::Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Parameter(format!("sweep: {name} needs positive integers, got {v}")))
        }
    };
    match name {
        "p_ut_dbm" => c.p_ut_dbm = v,
        "rho_dbm" => c.rho_dbm = v,
        "gamma_db" => c.gamma_db = v,
        "noise_dbm" => c.noise_dbm = v,
        "radius" => c.radius = v,
        "devices" => c.devices = count(v)?,
        "uavs" => c.uavs = count(v)?,
        "channels" => c.channels = count(v)?,
        _ => return Err(Error::Parameter(format!("sweep: unknown parameter {name:?}"))),
    }
    Ok(c)
}

/// Builds the scenario of one ensemble member.
pub fn build_scenario(cfg: &ScenarioConfig, seed: u64) -> uavdeploy::Result<Scenario> {
    let radio = RadioParams::from_dbm(cfg.p_ut_dbm, cfg.rho_dbm, cfg.gamma_db, cfg.noise_dbm, cfg.eh_efficiency);
    let altitude_bounds = (cfg.altitude_min, cfg.altitude_max);
    let scn = match &cfg.file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Parameter(format!("scenario file {path}: {e}")))?;
            let base = Scenario::from_toml(&text)?;
            Scenario { uav_count: cfg.uavs, channel_count: cfg.channels, radio, altitude_bounds, seed, ..base }
        }
        None => generate_scenario(&ScenarioSpec {
            devices: cfg.devices,
            radius: cfg.radius,
            uav_count: cfg.uavs,
            channel_count: cfg.channels,
            seed,
            channel: ChannelParams::urban(),
            radio,
            altitude_bounds,
        })?,
    };
    scn.validate()?;
    Ok(scn)
}

/// Git blob hash (`git hash-object`) of `bytes`.
pub fn git_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn scenario_hash(scn: &Scenario) -> uavdeploy::Result<String> {
    Ok(git_hash(scn.to_toml()?.as_bytes()))
}

/// One line of `results.csv`. Failed runs leave the metric cells empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub sweep_name: String,
    pub sweep_value: Option<f64>,
    pub policy: String,
    pub time: String,
    pub infra: String,
    pub access: String,
    pub seed: u64,
    pub scenario_hash: String,
    pub status: String,
    pub error_code: i32,
    pub error_class: String,
    pub error: String,
    pub sum_throughput: Option<f64>,
    pub jain: Option<f64>,
    pub mean_dl_altitude: Option<f64>,
    pub mean_ul_altitude: Option<f64>,
    pub mean_coverage_radius: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

/// One line of `summary.csv`: means over the successful members of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sweep_name: String,
    pub sweep_value: Option<f64>,
    pub policy: String,
    pub time: String,
    pub infra: String,
    pub access: String,
    pub runs: usize,
    pub ok_runs: usize,
    pub mean_sum_throughput: Option<f64>,
    pub mean_jain: Option<f64>,
    pub mean_dl_altitude: Option<f64>,
    pub mean_ul_altitude: Option<f64>,
    pub mean_coverage_radius: Option<f64>,
    pub mean_iterations: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    value: Option<f64>,
    policy: Policy,
    time: Time,
    infra: Infra,
    access: AccessMode,
    seed: u64,
}

fn run_options(spec: &ExperimentSpec, job: &Job) -> RunOptions {
    RunOptions {
        eps: spec.solver.eps,
        max_iters: spec.solver.max_iters,
        init_altitude: spec.solver.init_altitude,
        policy: match job.policy {
            Policy::Optimal => SchedulingPolicy::Optimal,
            Policy::Nf => SchedulingPolicy::NearFirst,
            Policy::Ff => SchedulingPolicy::FarFirst,
        },
        time_mode: match job.time {
            Time::Ota => TimeMode::Optimal,
            Time::Eta => TimeMode::Equal,
        },
        infra: match job.infra {
            Infra::Uav => Infrastructure::Uav,
            Infra::Bs => Infrastructure::FixedBs,
        },
        access: match job.access {
            AccessMode::Ofdma => Access::Ofdma,
            AccessMode::Tdma => Access::Tdma,
        },
        ..RunOptions::default()
    }
}

fn run_job(spec: &ExperimentSpec, job: &Job) -> ResultRow {
    let mut row = ResultRow {
        sweep_name: spec.sweep.as_ref().map_or(String::new(), |s| s.name.clone()),
        sweep_value: job.value,
        policy: job.policy.to_string(),
        time: job.time.to_string(),
        infra: job.infra.to_string(),
        access: job.access.to_string(),
        seed: job.seed,
        scenario_hash: String::new(),
        status: "ok".into(),
        error_code: 0,
        error_class: String::new(),
        error: String::new(),
        sum_throughput: None,
        jain: None,
        mean_dl_altitude: None,
        mean_ul_altitude: None,
        mean_coverage_radius: None,
        iterations: None,
        converged: None,
    };
    let outcome = (|| {
        let cfg = match (&spec.sweep, job.value) {
            (Some(s), Some(v)) => apply_sweep(&spec.scenario, &s.name, v)?,
            _ => spec.scenario.clone(),
        };
        let scn = build_scenario(&cfg, job.seed)?;
        row.scenario_hash = scenario_hash(&scn)?;
        run(&scn, &run_options(spec, job))
    })();
    match outcome {
        Ok(r) => {
            row.sum_throughput = Some(r.report.sum_throughput);
            row.jain = r.report.jain;
            row.mean_dl_altitude = Some(r.mean_dl_altitude());
            row.mean_ul_altitude = Some(r.mean_ul_altitude());
            row.mean_coverage_radius = Some(r.mean_coverage_radius());
            row.iterations = Some(r.iterations);
            row.converged = Some(r.converged);
        }
        Err(e) => {
            row.status = "error".into();
            row.error_code = e.exit_code();
            row.error_class = e.class().into();
            row.error = e.to_string();
        }
    }
    row
}

/// Every (sweep point, mode, seed) combination, in output order.
fn jobs(spec: &ExperimentSpec) -> Vec<Job> {
    let m = &spec.modes;
    let mut out = vec![];
    for value in spec.sweep_values() {
        for &policy in &m.policy {
            for &time in &m.time {
                for &infra in &m.infra {
                    for &access in &m.access {
                        for e in 0..spec.ensemble as u64 {
                            out.push(Job { value, policy, time, infra, access, seed: spec.seed + e });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Runs the whole grid. Rows come back in job order whatever the pool size.
pub fn run_sweep(spec: &ExperimentSpec) -> uavdeploy::Result<Vec<ResultRow>> {
    spec.validate()?;
    let jobs = jobs(spec);
    Ok(jobs.par_iter().map(|j| run_job(spec, j)).collect())
}

fn mean_of(rows: &[&ResultRow], f: impl Fn(&ResultRow) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Ensemble means per sweep point and mode.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = vec![];
    let mut start = 0;
    while start < rows.len() {
        let key = |r: &ResultRow| (r.sweep_value.map(f64::to_bits), r.policy.clone(), r.time.clone(), r.infra.clone(), r.access.clone());
        let k = key(&rows[start]);
        let end = start + rows[start..].iter().take_while(|r| key(r) == k).count();
        let group: Vec<&ResultRow> = rows[start..end].iter().collect();
        let ok: Vec<&ResultRow> = group.iter().copied().filter(|r| r.status == "ok").collect();
        let first = group[0];
        out.push(SummaryRow {
            sweep_name: first.sweep_name.clone(),
            sweep_value: first.sweep_value,
            policy: first.policy.clone(),
            time: first.time.clone(),
            infra: first.infra.clone(),
            access: first.access.clone(),
            runs: group.len(),
            ok_runs: ok.len(),
            mean_sum_throughput: mean_of(&ok, |r| r.sum_throughput),
            mean_jain: mean_of(&ok, |r| r.jain),
            mean_dl_altitude: mean_of(&ok, |r| r.mean_dl_altitude),
            mean_ul_altitude: mean_of(&ok, |r| r.mean_ul_altitude),
            mean_coverage_radius: mean_of(&ok, |r| r.mean_coverage_radius),
            mean_iterations: mean_of(&ok, |r| r.iterations.map(|i| i as f64)),
        });
        start = end;
    }
    out
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().from_writer(vec![]);
    if rows.is_empty() {
        w.write_record(header).expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

const RESULT_HEADER: [&str; 19] = [
    "sweep_name", "sweep_value", "policy", "time", "infra", "access", "seed", "scenario_hash", "status",
    "error_code", "error_class", "error", "sum_throughput", "jain", "mean_dl_altitude", "mean_ul_altitude",
    "mean_coverage_radius", "iterations", "converged",
];

#[derive(Serialize)]
struct Manifest<'a> {
    tool: Tool,
    hashes: Hashes,
    experiment: &'a ExperimentSpec,
}

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct Hashes {
    /// Scenario of the first sweep point and seed.
    scenario: String,
    results: String,
    summary: String,
}

/// Writes `results.csv`, `summary.csv` and `manifest.toml` into `dir`.
pub fn write_outputs(dir: &Path, spec: &ExperimentSpec, rows: &[ResultRow]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let results = csv_bytes(rows, &RESULT_HEADER);
    let summary = csv_bytes(&summarize(rows), &[]);
    let base = spec
        .sweep_values()
        .first()
        .copied()
        .flatten()
        .map_or(Ok(spec.scenario.clone()), |v| apply_sweep(&spec.scenario, &spec.sweep.as_ref().unwrap().name, v))
        .and_then(|cfg| build_scenario(&cfg, spec.seed))
        .and_then(|s| scenario_hash(&s))
        .unwrap_or_default();
    let manifest = Manifest {
        tool: Tool { name: "uavdeploy", version: env!("CARGO_PKG_VERSION") },
        hashes: Hashes { scenario: base, results: git_hash(&results), summary: git_hash(&summary) },
        experiment: spec,
    };
    fs::write(dir.join("results.csv"), results)?;
    fs::write(dir.join("summary.csv"), summary)?;
    fs::write(dir.join("manifest.toml"), toml::to_string(&manifest).expect("manifest serializes"))
}

/// Exit status of a finished sweep: the code of the first failed row, or 0.
pub fn exit_status(rows: &[ResultRow]) -> i32 {
    rows.iter().find(|r| r.error_code != 0).map_or(0, |r| r.error_code)
}
