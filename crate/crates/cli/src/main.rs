mod commands;
mod config;
mod error;
mod figures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use config::ConfigArgs;
use output::Format;

/// Conditional spin-ensemble trajectories under continuous J_z measurement.
#[derive(Debug, Parser)]
#[command(name = "spinfilter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct OutputArgs {
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One trajectory: time series, per-block variances, diagnostics, final state.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Independent trajectories on noise streams 0..n_traj of one seed.
    Ensemble {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of trajectories (file key `n_traj`).
        #[arg(long = "n_traj", visible_alias = "n-traj")]
        n_traj: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Preset experiments.
    Figure {
        name: figures::Preset,
        /// Noise seed; drawn from OS entropy when absent.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Full oracle gate: generator and lockstep checks at N = 2..6.
    Validate {
        /// Seed for the random test states and noise; drawn from OS entropy when absent.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse() -> Result<Cli, clap::Error> {
    let defaults = config::defaults_listing();
    let command = Cli::command()
        .mut_subcommand("run", |c| c.after_help(defaults.clone()))
        .mut_subcommand("ensemble", |c| c.after_help(defaults.clone()));
    let matches = command.try_get_matches()?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { config, output } => commands::run(&config, &output.out, output.format),
        Command::Ensemble {
            config,
            n_traj,
            output,
        } => commands::ensemble(&config, n_traj, &output.out, output.format),
        Command::Figure { name, seed, output } => figures::run(name, seed, &output.out, output.format),
        Command::Validate { seed } => commands::validate(seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
