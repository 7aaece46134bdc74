//! `diqkd`: batch front-end for the simulator.
//!
//! Exit codes: 0 on success, 1 on any configuration or runtime error, 2 when
//! `simulate` ends in a protocol abort.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig};

#[derive(Parser)]
#[command(name = "diqkd", version, about = "Device-independent QKD simulation runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one session and optionally write its transcript JSON
    Simulate(Flags),
    /// Honest-device batches over a noise × η grid, one CSV row per point
    Sweep(Flags),
    /// Key-rate curve over an η grid as CSV
    Rates(Flags),
    /// Adversarial device battery as CSV
    Attack(Flags),
    /// Hash a packed bit file with Toeplitz or Trevisan
    Extract(Flags),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let (flags, run): (&Flags, fn(&RunConfig) -> anyhow::Result<commands::Report>) = match &cli.command {
        Command::Simulate(f) => (f, commands::simulate),
        Command::Sweep(f) => (f, commands::sweep),
        Command::Rates(f) => (f, commands::rates),
        Command::Attack(f) => (f, commands::attack),
        Command::Extract(f) => (f, commands::extract),
    };
    match RunConfig::load(flags).and_then(|c| run(&c)) {
        Ok(report) => {
            println!("{}", report.summary);
            if report.aborted {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
