use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use diffnet_cli::{commands, default_grid, parse_grid, parse_scenario, Result};

/// Diffusion LMS over lossy links: simulation and steady-state theory
/// workbench.
#[derive(Parser)]
#[command(name = "diffnet", version, about)]
struct Cli {
    /// Scenario config file (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's run.out)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed (overrides the config's run.seed)
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Probability grid for sweep/rank as a:b:step (default 0:1:0.1)
    #[arg(long, global = true, value_name = "A:B:STEP")]
    grid: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form steady-state MSD per node
    Theory,
    /// Monte Carlo learning curves and steady-state tail estimates
    Simulate,
    /// Step-size bounds, eta flags and spectral radii
    Stability,
    /// Theory vs simulation comparison table plus stability report
    Compare,
    /// Steady-state MSD as a function of the uniform error probability
    Sweep {
        /// Also simulate at every grid point
        #[arg(long)]
        simulate: bool,
    },
    /// Node ordering by local theory MSD across error probabilities
    Rank,
    /// MAC collision model and backoff simulation
    Mac {
        #[command(subcommand)]
        command: MacCommand,
    },
}

#[derive(Subcommand)]
enum MacCommand {
    /// Per-node fixed-point transmission/collision/loss probabilities
    Model,
    /// Slotted saturated backoff simulation
    Sim,
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.ok_or_else(|| {
        diffnet_cli::CliError::Validation("--config PATH is required".into())
    })?;
    let scenario = parse_scenario(&config)?;
    let resolved = scenario.resolve_with(cli.seed, cli.out)?;
    let grid = match &cli.grid {
        Some(spec) => parse_grid(spec)?,
        None => default_grid(),
    };

    match cli.command {
        Command::Theory => {
            commands::cmd_theory(&resolved)?;
        }
        Command::Simulate => {
            commands::cmd_simulate(&resolved)?;
        }
        Command::Stability => {
            commands::cmd_stability(&resolved)?;
        }
        Command::Compare => {
            commands::cmd_compare(&resolved)?;
        }
        Command::Sweep { simulate } => {
            commands::cmd_sweep(&resolved, &grid, simulate)?;
        }
        Command::Rank => {
            commands::cmd_rank(&resolved, &grid)?;
        }
        Command::Mac { command } => match command {
            MacCommand::Model => {
                commands::cmd_mac_model(&resolved)?;
            }
            MacCommand::Sim => {
                commands::cmd_mac_sim(&resolved)?;
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(1)
        }
    }
}
