use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lotgen::commands::{
    cmd_generate, cmd_oracle, cmd_solve, cmd_stats, cmd_validate, GenerateArgs, SolveArgs, StatsArgs,
    DEFAULT_ORACLE_BUDGET,
};
use lotgen::ExitStatus;

#[derive(Parser)]
#[command(name = "lotgen", version, about = "Exact lot-type design: generate, validate and solve instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance to proven optimality (or until a limit).
    Solve(SolveArgs),
    /// Write a synthetic instance.
    Generate(GenerateArgs),
    /// Check an instance file and list problems.
    Validate { instance: PathBuf },
    /// Exhaustive reference solve for small instances.
    Oracle {
        instance: PathBuf,
        /// Maximum number of assignment evaluations.
        #[arg(long, default_value_t = DEFAULT_ORACLE_BUDGET)]
        budget: u128,
    },
    /// Lot-type count and size of the complete model.
    Stats(StatsArgs),
}

fn run(cli: Cli) -> anyhow::Result<ExitStatus> {
    let mut out = io::stdout().lock();
    let status = match cli.command {
        Command::Solve(args) => cmd_solve(&args, &mut out)?.1,
        Command::Generate(args) => cmd_generate(&args, &mut out)?,
        Command::Validate { instance } => cmd_validate(&instance, &mut out)?,
        Command::Oracle { instance, budget } => cmd_oracle(&instance, budget, &mut out)?,
        Command::Stats(args) => cmd_stats(&args, &mut out)?,
    };
    Ok(status)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOTGEN_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ExitStatus::Input.code() as u8)
        }
    }
}
