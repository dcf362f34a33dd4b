use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use uavdeploy_cli::*;

/// Runs UAV swarm deployment experiments and writes result tables.
#[derive(Parser, Debug)]
#[command(name = "uavdeploy", version)]
struct Args {
    /// Experiment file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of the first ensemble member.
    #[arg(long)]
    seed: Option<u64>,
    /// Parameter sweep, NAME=LO:STEP:HI.
    #[arg(long, value_parser = Sweep::parse)]
    sweep: Option<Sweep>,
    #[arg(long, value_enum)]
    policy: Option<Policy>,
    #[arg(long, value_enum)]
    time: Option<Time>,
    #[arg(long, value_enum)]
    infra: Option<Infra>,
    #[arg(long, value_enum)]
    access: Option<AccessMode>,
    /// Runs per sweep point and mode.
    #[arg(long)]
    ensemble: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn spec_from(args: &Args) -> uavdeploy::Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| uavdeploy::Error::Parameter(format!("{}: {e}", path.display())))?;
            ExperimentSpec::from_toml(&text)
                .map_err(|e| uavdeploy::Error::Parameter(format!("{}: {e}", path.display())))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(s) = &args.sweep {
        spec.sweep = Some(s.clone());
    }
    if let Some(p) = args.policy {
        spec.modes.policy = vec![p];
    }
    if let Some(t) = args.time {
        spec.modes.time = vec![t];
    }
    if let Some(i) = args.infra {
        spec.modes.infra = vec![i];
    }
    if let Some(a) = args.access {
        spec.modes.access = vec![a];
    }
    if let Some(n) = args.ensemble {
        spec.ensemble = n;
    }
    spec.validate()?;
    Ok(spec)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = match spec_from(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let rows = match run_sweep(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Err(e) = write_outputs(&args.out, &spec, &rows) {
        eprintln!("error: writing {}: {e}", args.out.display());
        return ExitCode::from(1);
    }
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    eprintln!("{} runs, {failed} failed, results in {}", rows.len(), args.out.display());
    ExitCode::from(exit_status(&rows) as u8)
}
