use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use thermolind_cli::config::{self, Task};
use thermolind_cli::tasks::{CliError, Run, Tolerances};

#[derive(Parser)]
#[command(name = "thermolind", version, about = "Thermalizing master equations: certification, dynamics, benchmarks and error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Profile::Default, global = true)]
    tolerance_profile: Profile,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Run every task listed in the config.
    Run,
    /// Structural checks (CP, trace, KMS, GNS, Gibbs fixed point) per generator.
    Certify,
    /// Propagate the initial state under each generator.
    Evolve,
    /// Compare against exact qubit + spin-star dynamics.
    Benchmark,
    /// Table of every closed-form bound over the configured times.
    Bounds,
    /// Truncation error of a smoothed jump operator on a chain.
    Quasilocality,
    /// Grid over alpha, observation time and seed on a worker pool (THERMOLIND_WORKERS threads).
    Sweep,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Profile {
    Default,
    Strict,
}

const EXIT_INPUT: u8 = 1;
const EXIT_CERTIFICATION: u8 = 2;

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| thermolind::Error::Input("--config is required".into()))?;
    let mut cfg = config::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let (tol, profile) = match cli.tolerance_profile {
        Profile::Default => (Tolerances::default_profile(), "default"),
        Profile::Strict => (Tolerances::strict(), "strict"),
    };
    let tasks = match cli.command {
        Command::Run => cfg.tasks.clone(),
        Command::Certify => vec![Task::Certify],
        Command::Evolve => vec![Task::Evolve],
        Command::Benchmark => vec![Task::Benchmark],
        Command::Bounds => vec![Task::Bounds],
        Command::Quasilocality => vec![Task::Quasilocality],
        Command::Sweep => Vec::new(),
    };
    let mut run = Run::new(cfg, out, tol, profile)?;
    if cli.command == Command::Sweep {
        run.sweep()?;
    } else {
        run.run_tasks(&tasks)?;
    }
    run.write_summary()?;
    Ok(!run.certification_failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("thermolind: certification failed; see summary.txt");
            ExitCode::from(EXIT_CERTIFICATION)
        }
        Err(e) => {
            eprintln!("thermolind: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
