pub mod bench;
pub mod evaluate;
pub mod gradcheck;
pub mod train;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{DataSection, DoaSection, EnsembleSection, ModelSection, RunConfig, RunSection};
use crate::error::{CliError, CliResult};

pub use train::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "kcnet", version, about = "Sparse random-projection classifiers with trainable input selection")]
pub struct Cli {
    /// Worker threads for the global pool [default: all cores].
    #[arg(long, global = true, env = "KCNET_THREADS")]
    pub threads: Option<usize>,
    /// TOML config file; command-line flags take precedence over its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit KCNet and evaluate on the test set.
    Fit(FitArgs),
    /// Optimize the input selection of one KCNet, then evaluate.
    Doa(DoaArgs),
    /// Optimize submodels independently, join them, refit the decoder, evaluate.
    Ensemble(EnsembleArgs),
    /// Fit the extreme learning machine baseline.
    Elm(FitArgs),
    /// Score a saved model on test data.
    Evaluate(evaluate::EvaluateArgs),
    /// Check the score gradient against dense and finite-difference oracles.
    Gradcheck(gradcheck::GradcheckArgs),
    /// Single-threaded phase timings, optionally over a width sweep.
    Bench(bench::BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataSection,
    #[command(flatten)]
    pub model: ModelSection,
    #[command(flatten)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Args)]
pub struct DoaArgs {
    #[command(flatten)]
    pub data: DataSection,
    #[command(flatten)]
    pub model: ModelSection,
    #[command(flatten)]
    pub doa: DoaSection,
    #[command(flatten)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub data: DataSection,
    #[command(flatten)]
    pub model: ModelSection,
    #[command(flatten)]
    pub doa: DoaSection,
    #[command(flatten)]
    pub ensemble: EnsembleSection,
    #[command(flatten)]
    pub run: RunSection,
}

impl From<FitArgs> for RunConfig {
    fn from(a: FitArgs) -> Self {
        RunConfig {
            data: a.data,
            model: a.model,
            run: a.run,
            ..RunConfig::default()
        }
    }
}

impl From<DoaArgs> for RunConfig {
    fn from(a: DoaArgs) -> Self {
        RunConfig {
            data: a.data,
            model: a.model,
            doa: a.doa,
            run: a.run,
            ..RunConfig::default()
        }
    }
}

impl From<EnsembleArgs> for RunConfig {
    fn from(a: EnsembleArgs) -> Self {
        RunConfig {
            data: a.data,
            model: a.model,
            doa: a.doa,
            ensemble: a.ensemble,
            run: a.run,
        }
    }
}

impl Cli {
    pub fn log_level(&self) -> log::LevelFilter {
        if self.quiet {
            return log::LevelFilter::Error;
        }
        match self.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            2 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    }
}

/// Runs the parsed command.
pub fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // the pool can only be built once per process; later calls keep the first
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let file = cli.config.as_deref();
    match cli.command {
        Command::Fit(a) => train::run(ModelKind::Kcnet, RunConfig::layered(a.into(), file)?),
        Command::Doa(a) => train::run(ModelKind::Doa, RunConfig::layered(a.into(), file)?),
        Command::Ensemble(a) => train::run(ModelKind::Ensemble, RunConfig::layered(a.into(), file)?),
        Command::Elm(a) => train::run(ModelKind::Elm, RunConfig::layered(a.into(), file)?),
        Command::Evaluate(mut a) => {
            if let Some(path) = file {
                a.data = a.data.overlay(RunConfig::from_file(path)?.data);
            }
            evaluate::run(a)
        }
        Command::Gradcheck(a) => gradcheck::run(a),
        Command::Bench(a) => {
            let cfg = RunConfig::layered(a.config_layer(), file)?;
            bench::run(&a, cfg)
        }
    }
}
