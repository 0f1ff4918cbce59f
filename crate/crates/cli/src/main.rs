use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use splitlab_cli::{cmd_predict, emit_rows, exit_code_for, load_config, run_compare, run_sweep,
                   Overrides};

/// Operator-splitting laboratory: predict and measure coupling errors.
#[derive(Parser)]
#[command(name = "splitlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Relative oracle tolerance override.
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
    /// Absolute oracle tolerance override.
    #[arg(long, global = true)]
    tol_abs: Option<f64>,
    /// Stage sub-integrator: exact, forward-euler, or backward-euler.
    #[arg(long, global = true)]
    integrator: Option<String>,
    /// Report destination (defaults to the config's output path, else stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format: csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the leading-order coefficient table for a scheme.
    Predict {
        /// Builtin name (parallel, sequential, eam_original, eam_revised)
        /// or path to a scheme file.
        scheme: String,
        /// Comma-separated process names to check the scheme against.
        #[arg(long, value_delimiter = ',')]
        processes: Option<Vec<String>>,
    },
    /// Measure an LTE sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the original and revised couplings on a dust problem.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let over = Overrides {
        tol_rel: cli.tol_rel,
        tol_abs: cli.tol_abs,
        integrator: cli.integrator,
        out: cli.out,
        format: cli.format,
    };
    match run(cli.command, &over) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(command: Command, over: &Overrides) -> anyhow::Result<()> {
    match command {
        Command::Predict { scheme, processes } => {
            let table = cmd_predict(&scheme, processes.as_deref())?;
            print!("{table}");
        }
        Command::Sweep { config } => {
            let cfg = load_config(&config)?;
            let outcome = run_sweep(&cfg, over)?;
            if let Some(path) = emit_rows(&outcome.rows, &cfg, over)? {
                eprintln!("report written to {}", path.display());
            }
            print!("{}", outcome.summary);
        }
        Command::Compare { config } => {
            let cfg = load_config(&config)?;
            let (rows, summary) = run_compare(&cfg, over)?;
            if let Some(path) = emit_rows(&rows, &cfg, over)? {
                eprintln!("report written to {}", path.display());
            }
            print!("{summary}");
        }
    }
    Ok(())
}
