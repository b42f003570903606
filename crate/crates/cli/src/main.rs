//! `voshm`: batch driver for value-of-SHM studies.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use voshm_core::lifecycle::{CaseStudyConfig, Mode};

use config::{CaseConfig, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "voshm", version, about = "Value of structural health monitoring by preposterior Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML (or `.json`) run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long = "n-mcs", global = true)]
    n_mcs: Option<usize>,

    /// Particles per filter.
    #[arg(long = "n-p", global = true)]
    n_p: Option<usize>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Directory holding the fitted surrogate and the learned environmental model.
    #[arg(long, global = true)]
    artifacts: Option<PathBuf>,

    /// Case-study preset (1 to 4); replaces the `lifecycle.case` block except its mode.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=4))]
    case: Option<u8>,

    /// inspection-only, shm or prior.
    #[arg(long, global = true)]
    mode: Option<Mode>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn the temperature model of the stiffness from synthetic undamaged data.
    LearnEnv,
    /// Fit the modal response surface to the finite-element model.
    FitSurrogate,
    /// Run one episode and write its trace.
    Replay {
        /// Scenario document; sampled from the seed when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Scenario index selecting the random streams.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Paired inspection-only versus SHM study.
    Voshm,
    /// Paired prior versus data-informed study.
    Voi,
    /// Grid search of the policy thresholds.
    Optimize,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.n_mcs {
        cfg.lifecycle.mc.n_mcs = n;
    }
    if let Some(n) = cli.n_p {
        cfg.lifecycle.mc.n_p = Some(n);
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(dir) = &cli.artifacts {
        cfg.output.artifacts = dir.clone();
    }
    if let Some(case) = cli.case {
        cfg.lifecycle.case = CaseConfig::from_study(cfg.lifecycle.case.mode, &CaseStudyConfig::preset(case)?);
    }
    if let Some(mode) = cli.mode {
        cfg.lifecycle.case.mode = mode;
    }
    cfg.resolved()
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    report::prepare_output(&cfg)?;
    pool.install(|| match &cli.command {
        Command::LearnEnv => commands::learn_env(&cfg),
        Command::FitSurrogate => commands::fit_surrogate(&cfg),
        Command::Replay { scenario, index } => commands::replay(&cfg, scenario.as_deref(), *index),
        Command::Voshm => commands::voshm(&cfg),
        Command::Voi => commands::voi(&cfg),
        Command::Optimize => commands::optimize(&cfg),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
