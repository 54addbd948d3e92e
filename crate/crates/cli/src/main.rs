use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use robsim_cli::{
    assimilate_to_dir, diagnose_to_file, exit_code, observe_to_file, simulate_to_dir, threads_from_env, tune_to_file,
    twin_to_dir, RunConfig,
};
use robsim_core::interpolant::InterpolantSpec;
use robsim_core::Result;

#[derive(Parser)]
#[command(name = "robsim", version, about = "Rotating Oberbeck-Boussinesq simulator with nudging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write snapshots and series.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Twin experiment: spin-up, then reference and nudged copy in lockstep.
    Twin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        interp: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coarse observations of a trajectory directory.
    Observe {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        interp: String,
        #[arg(long)]
        every: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nudge toward an observation file.
    Assimilate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Energy balances, extrema and norms of a trajectory directory.
    Diagnose {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for a nudging strength and resolution with monotone decay.
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn with_nudging(mut cfg: RunConfig, lambda: f64, interp: Option<&str>) -> Result<RunConfig> {
    cfg.lambda = lambda;
    if let Some(spec) = interp {
        cfg.interp = spec.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Simulate { config, out } => simulate_to_dir(&RunConfig::load(&config)?, &out),
        Command::Twin { config, lambda, interp, out } => {
            let cfg = with_nudging(RunConfig::load(&config)?, lambda, Some(&interp))?;
            twin_to_dir(&cfg, &out, threads)
        }
        Command::Observe { traj, interp, every, out } => {
            let spec: InterpolantSpec = interp.parse()?;
            let n = observe_to_file(&traj, spec, every, &out)?;
            println!("{n} observations written to {}", out.display());
            Ok(())
        }
        Command::Assimilate { config, obs, lambda, out } => {
            let cfg = with_nudging(RunConfig::load(&config)?, lambda, None)?;
            assimilate_to_dir(&cfg, &obs, &out)
        }
        Command::Diagnose { traj, out } => {
            println!("{}", diagnose_to_file(&traj, &out)?);
            Ok(())
        }
        Command::Tune { config, out } => tune_to_file(&RunConfig::load(&config)?, &out, threads),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {e}", e.name());
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
