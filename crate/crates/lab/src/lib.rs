//! Command-line laboratory for blind mean field games: config parsing,
//! artifact writing, and the `mfgbelief` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Status;
use crate::config::RunConfig;
use crate::error::LabError;
use crate::output::Artifacts;

#[derive(Debug, Parser)]
#[command(name = "mfgbelief", version, about = "Blind mean field games: solvers, certificates and belief filtering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classical equilibrium from a single initial density.
    SolveComplete(RunArgs),
    /// Blind equilibrium over an atomic belief.
    SolveBlind(RunArgs),
    /// Receding-horizon play with observed payments and belief filtering.
    SimulateObserved(RunArgs),
    /// Sampling certificate for the lifted monotonicity condition.
    CertifyMonotone(RunArgs),
    /// Weak-solution residual over a refinement ladder.
    ValidateWeak(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sampler seed; overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveComplete(_) => "solve-complete",
            Command::SolveBlind(_) => "solve-blind",
            Command::SimulateObserved(_) => "simulate-observed",
            Command::CertifyMonotone(_) => "certify-monotone",
            Command::ValidateWeak(_) => "validate-weak",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::SolveComplete(a)
            | Command::SolveBlind(a)
            | Command::SimulateObserved(a)
            | Command::CertifyMonotone(a)
            | Command::ValidateWeak(a) => a,
        }
    }
}

fn execute(command: &Command) -> Result<Status, LabError> {
    let args = command.args();
    let mut cfg: RunConfig = config::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output.directory = out.display().to_string();
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(LabError::Validation("--threads: must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let dir = PathBuf::from(&cfg.output.directory);
    let mut out = Artifacts::create(&dir)?;
    let status = match command {
        Command::SolveComplete(_) => commands::solve_complete(&cfg, &mut out),
        Command::SolveBlind(_) => commands::solve_blind(&cfg, &mut out),
        Command::SimulateObserved(_) => commands::simulate(&cfg, &mut out),
        Command::CertifyMonotone(_) => commands::certify_monotone(&cfg, &mut out),
        Command::ValidateWeak(_) => commands::validate_weak(&cfg, &mut out),
    }?;
    out.finish(command.name(), &cfg, status.code())?;
    Ok(status)
}

pub fn run(cli: &Cli) -> ExitCode {
    match execute(&cli.command) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("{}: solver did not converge; artifacts written", cli.command.name());
            ExitCode::from(Status::NotConverged.code())
        }
        Err(e) => {
            eprintln!("{}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
