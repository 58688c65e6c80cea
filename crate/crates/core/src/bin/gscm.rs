use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gscm::cli::{self, EXIT_CONFIG, EXIT_RUNTIME};
use gscm::Error;

/// Geometry-based stochastic channel simulator for the 6-100 GHz band.
#[derive(Parser)]
#[command(name = "gscm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a time-stepped link simulation and write trace CSVs.
    Run {
        /// Scenario config file.
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory for CSVs, manifest and plot scripts.
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also dump the serving-link channel realization of UT 0.
        #[arg(long)]
        dump_channel: bool,
    },
    /// Write the pathloss-over-distance sweep CSV only.
    SweepPathloss {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a config, printing its canonical form.
    ValidateConfig {
        #[arg(short, long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            dump_channel,
        } => cli::run(&config, &out, seed, dump_channel),
        Command::SweepPathloss { config, out, seed } => cli::run_sweep(&config, &out, seed),
        Command::ValidateConfig { config } => match cli::validate_config(&config) {
            Ok(canonical) => {
                print!("{canonical}");
                Ok(())
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME as u8)
        }
    }
}
