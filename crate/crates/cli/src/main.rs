use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use randmix_cli::commands::{option_surface_cmd, simulate_paths_cmd, yield_curves_cmd};
use randmix_cli::validate::validate_cmd;
use randmix_cli::{Format, RunOptions, ScenarioConfig};

/// Interest rate models from randomised mixtures of Lévy processes.
#[derive(Parser)]
#[command(name = "randmix", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate driver, information, short rate, bond and kernel paths.
    SimulatePaths(Common),
    /// Bond price and yield curves at the configured valuation times.
    YieldCurves(Common),
    /// Monte Carlo call prices over expiries and strikes.
    OptionSurface(Common),
    /// Run the self-checks and write a JSON report. Exits nonzero on failure.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Number of simulated paths, states or Monte Carlo samples.
    #[arg(long)]
    paths: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(ScenarioConfig, RunOptions)> {
        let cfg = ScenarioConfig::from_path(&self.config)?;
        let opts = RunOptions::resolve(
            &cfg,
            &self.config,
            self.seed,
            self.out.clone(),
            self.format,
            self.paths,
        );
        Ok((cfg, opts))
    }
}

fn run(cli: Cli) -> Result<bool> {
    let files = match cli.command {
        Command::SimulatePaths(c) => {
            let (cfg, opts) = c.load()?;
            simulate_paths_cmd(&cfg, &cfg.build_model()?, &opts)?
        }
        Command::YieldCurves(c) => {
            let (cfg, opts) = c.load()?;
            yield_curves_cmd(&cfg, &cfg.build_model()?, &opts)?
        }
        Command::OptionSurface(c) => {
            let (cfg, opts) = c.load()?;
            option_surface_cmd(&cfg, &cfg.build_model()?, &opts)?
        }
        Command::Validate(c) => {
            let (cfg, opts) = c.load()?;
            let (report, path) = validate_cmd(&cfg, &opts)?;
            for check in &report.checks {
                let status = match (check.skipped, check.passed) {
                    (true, _) => "SKIP",
                    (false, true) => "PASS",
                    (false, false) => "FAIL",
                };
                println!("{status} {}: {}", check.name, check.detail);
            }
            println!("report written to {}", path.display());
            return Ok(report.passed);
        }
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
