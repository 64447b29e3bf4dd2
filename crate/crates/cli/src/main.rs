use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqsign_cli::{cmd_evaluate, cmd_probe, cmd_solve};

/// Bayesian sequential test for the sign of a Brownian drift: solve the
/// optimal stopping band, evaluate a band by simulation, or probe its
/// long-horizon limits.
#[derive(Parser)]
#[command(name = "seqsign", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the stopping band and write boundaries.csv plus summary.json.
    Solve {
        /// Path to the JSON run config.
        #[arg(long)]
        config: PathBuf,
        /// Directory for outputs (created if missing).
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Simulate a boundary CSV under the configured prior and write risk.json.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Boundary curve CSV, as written by `solve` (header `t,b1,b2`).
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report the long-horizon band limits and write asymptote.json.
    Probe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Override the seed from the config (used by the optional
        /// terminal-distribution probe).
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Solve { config, out_dir } => cmd_solve(&config, &out_dir).map(|out| {
            println!(
                "band starts at ({}, {}), model risk {}",
                out.b1_start, out.b2_start, out.value_at_start
            );
            println!(
                "wrote {} and {}",
                out.boundaries_path.display(),
                out.summary_path.display()
            );
        }),
        Cmd::Evaluate {
            config,
            curve,
            out_dir,
            seed,
        } => cmd_evaluate(&config, &curve, &out_dir, seed).map(|out| {
            println!("simulated risk {}", out.risk_mean);
            if out.censoring_warning {
                eprintln!("warning: a large fraction of paths hit the horizon unstopped");
            }
            println!("wrote {}", out.risk_path.display());
        }),
        Cmd::Probe {
            config,
            out_dir,
            seed,
        } => cmd_probe(&config, &out_dir, seed).map(|out| {
            println!("long-horizon band ({}, {})", out.b1_inf, out.b2_inf);
            println!("wrote {}", out.asymptote_path.display());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
