//! `parisian`: Parisian ruin probabilities for refracted Lévy risk models.
//!
//! Exit codes: 0 ok, 1 audit failure (verify or identities), 2 invalid input,
//! 3 numerical or I/O failure. Errors are reported as one JSON object on
//! stderr.

mod commands;
mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Body, Outcome};
use config::{Format, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] parisian::Error),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(parisian::Error::Validation(_) | parisian::Error::Unsupported(_)) => 2,
            CliError::Core(parisian::Error::Numeric(_)) | CliError::Io(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Failed(_) => "audit_failed",
            CliError::Config(_) => "config",
            CliError::Core(parisian::Error::Validation(_)) => "validation",
            CliError::Core(parisian::Error::Unsupported(_)) => "unsupported",
            CliError::Core(parisian::Error::Numeric(_)) => "numeric",
            CliError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "parisian", version, about = "Parisian ruin for refracted Lévy risk processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Initial surplus values, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// Parisian delays, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    r: Option<Vec<f64>>,
    /// Refraction rates, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    /// Discount rates, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    /// Upper barrier.
    #[arg(long, global = true)]
    a: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one query.
    Eval,
    /// Recompute a published table and compare cell by cell.
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        id: u8,
        /// Cross-check flagged or out-of-tolerance cells by Monte Carlo.
        #[arg(long)]
        mc_check: bool,
    },
    /// Compare formulas with Monte Carlo on the configured grid.
    Verify {
        #[arg(long, hide = true)]
        test_corrupt: bool,
    },
    /// Evaluate the Cartesian product of the configured grid.
    Sweep,
    /// Run the identity audit suite.
    Identities,
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let q = &mut cfg.query;
    q.x = common.x.clone().or(q.x.take());
    q.r = common.r.clone().or(q.r.take());
    q.delta = common.delta.clone().or(q.delta.take());
    q.q = common.q.clone().or(q.q.take());
    q.a = common.a.or(q.a);
    if let Some(d) = &common.delta {
        if cfg.refraction.delta.is_none() && d.len() == 1 {
            cfg.refraction.delta = Some(d[0]);
        }
    }
    cfg.mc.seed = common.seed.or(cfg.mc.seed);
    cfg.mc.paths = common.paths.or(cfg.mc.paths);
    cfg.mc.workers = common.workers.or(cfg.mc.workers);
    if common.format.is_some() {
        cfg.output.format = common.format;
    }
    if let Some(p) = &common.out {
        cfg.output.path = Some(p.display().to_string());
    }
    Ok(cfg)
}

fn write(outcome: &Outcome, cfg: &RunConfig) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match &cfg.output.path {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::Io(format!("cannot create {p}: {e}")))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match &outcome.body {
        Body::Sheet(s) => s.write(&mut sink, cfg.format())?,
        Body::Doc(d) => {
            serde_json::to_writer_pretty(&mut sink, d).map_err(|e| CliError::Io(e.to_string()))?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.common)?;
    let outcome = match cli.command {
        Command::Eval => commands::eval(&cfg)?,
        Command::Table { id, mc_check } => commands::table(id, &cfg, mc_check)?,
        Command::Verify { test_corrupt } => commands::verify(&cfg, test_corrupt)?,
        Command::Sweep => commands::sweep(&cfg)?,
        Command::Identities => commands::identities(&cfg)?,
    };
    write(&outcome, &cfg)?;
    if let Some(s) = &outcome.summary {
        eprintln!("{s}");
    }
    match outcome.failure {
        Some(f) => Err(CliError::Failed(f)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let doc = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{doc}");
            ExitCode::from(e.exit_code())
        }
    }
}
