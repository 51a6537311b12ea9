//! `exmo` command-line front end. [`run`] parses arguments, sets up logging
//! and the worker pool, dispatches to a subcommand and returns the process
//! exit code.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;

pub use error::{CliError, CliResult, EXIT_CHECK_FAILED, EXIT_DIVERGED, EXIT_INPUT, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "exmo", version, about = "Exceptional-motion scoring for video sickness prediction")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for initialisation, shuffling, cropping and synthesis.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all logical cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the autoencoder (pre-train, then fine-tune) from a manifest.
    Train(commands::train::TrainArgs),
    /// Score videos with a trained model: per-frame e(t) and s_m(t).
    Score(commands::score::ScoreArgs),
    /// Score SSQ questionnaire responses.
    Ssq(commands::ssq::SsqArgs),
    /// Correlate motion scores with SSQ totals.
    Eval(commands::eval::EvalArgs),
    /// Generate synthetic clips with controlled motion velocity.
    Synth(commands::synth::SynthArgs),
    /// Finite-difference check of every operator's backward pass.
    Gradcheck(commands::gradcheck::GradcheckArgs),
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("EXMO_LOG", "info");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs one command and returns its exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    init_logging();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

/// Dispatches a parsed command inside a worker pool of the requested size.
pub fn execute(cli: Cli) -> CliResult<i32> {
    let file = config::FileConfig::load(cli.common.config.as_deref())?;
    let threads = config::pick(cli.common.threads, file.threads, default_threads());
    if threads == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {threads} worker threads: {e}")))?;
    let ctx = commands::Context {
        seed: config::pick(cli.common.seed, file.seed, 0),
        threads,
        config_file: cli.common.config.clone(),
        file,
    };
    pool.install(|| match &cli.command {
        Command::Train(a) => commands::train::run(&ctx, a),
        Command::Score(a) => commands::score::run(&ctx, a),
        Command::Ssq(a) => commands::ssq::run(&ctx, a),
        Command::Eval(a) => commands::eval::run(&ctx, a),
        Command::Synth(a) => commands::synth::run(&ctx, a),
        Command::Gradcheck(a) => commands::gradcheck::run(&ctx, a),
    })
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
