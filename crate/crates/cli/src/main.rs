//! `txembed` command-line interface.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{EmbedArgs, EvalArgs, GenArgs, ReportArgs, RetrieveArgs, TrainArgs, TuneArgs};
use config::ConfigFile;

#[derive(Debug, Parser)]
#[command(name = "txembed", version, about = "Client embeddings from aggregated transaction tables")]
struct Cli {
    /// TOML config file; its values override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads. `--threads 1` gives bit-identical reruns.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Base directory for relative paths.
    #[arg(long, global = true, env = "TXEMBED_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train an mSDA or skip-gram model.
    Train(TrainArgs),
    /// Embed a table with a trained model.
    Embed(EmbedArgs),
    /// Dispersion or missing-category evaluation of an embedding method.
    Eval(EvalArgs),
    /// MAP@k, recall and diversity of query embeddings against a database.
    Retrieve(RetrieveArgs),
    /// Grid search over method hyperparameters.
    Tune(TuneArgs),
    /// Typical members of the densest clusters as a sign-pattern matrix.
    Report(ReportArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<txembed::Error> for CliError {
    fn from(e: txembed::Error) -> Self {
        match e {
            txembed::Error::Config(m) => CliError::Usage(m),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::empty(),
    };
    if let Some(t) = cli.threads.or(file.threads()) {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Runtime(e.into()))?;
    }
    let env = commands::Env {
        data_dir: cli.data_dir.unwrap_or_else(|| PathBuf::from(".")),
    };
    match cli.command {
        Command::Gen(a) => commands::gen(&env, file.apply("gen", a)?),
        Command::Train(a) => commands::train(&env, file.apply("train", a)?),
        Command::Embed(a) => commands::embed(&env, file.apply("embed", a)?),
        Command::Eval(a) => commands::eval(&env, file.apply("eval", a)?),
        Command::Retrieve(a) => commands::retrieve(&env, file.apply("retrieve", a)?),
        Command::Tune(a) => commands::tune(&env, file.apply("tune", a)?),
        Command::Report(a) => commands::report(&env, file.apply("report", a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
