use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use voljump_cli::{describe_error, emit_plots, init_threads, run, Task};

#[derive(Parser)]
#[command(name = "voljump", version, about = "Densities and tail estimates of jump-perturbed stochastic volatility models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment file with [model], [jumps], [sim], [task] and [output] sections.
    #[arg(long)]
    config: PathBuf,
    /// Overrides sim.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and write per-path draws plus a moment summary.
    Simulate(RunArgs),
    /// Price density by kernel estimation and by the mixing representation.
    Density(RunArgs),
    /// Tail exponents, optionally swept over one parameter.
    Constants(RunArgs),
    /// Closed-form n-fold jump convolution against a numerical oracle.
    Convolve(RunArgs),
    /// Fit and judge a two-sided tail estimate.
    #[command(name = "verify-bounds")]
    VerifyBounds(RunArgs),
    /// Tail slopes before and after adding jumps.
    Compare(RunArgs),
    /// Write gnuplot scripts for the artifacts in a directory.
    Plots {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    init_threads()?;
    let (task, args) = match cli.command {
        Command::Plots { dir } => {
            for path in emit_plots(&dir)? {
                println!("{}", path.display());
            }
            return Ok(());
        }
        Command::Simulate(a) => (Task::Simulate, a),
        Command::Density(a) => (Task::Density, a),
        Command::Constants(a) => (Task::Constants, a),
        Command::Convolve(a) => (Task::Convolve, a),
        Command::VerifyBounds(a) => (Task::VerifyBounds, a),
        Command::Compare(a) => (Task::Compare, a),
    };
    let summary = run(task, &args.config, args.seed, args.out.as_deref())?;
    println!("out_dir={}", summary.out_dir.display());
    println!("config_sha256={}", summary.config_sha256);
    for (k, v) in &summary.facts {
        println!("{k}={v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (line, code) = describe_error(&err);
            eprintln!("{line}");
            ExitCode::from(code as u8)
        }
    }
}
