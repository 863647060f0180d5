//! Command-line driver: configuration, orchestration and output.

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, Format};

/// Overrides the directory output files are written to.
pub const OUT_DIR_ENV: &str = "DIRENTROPY_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Precondition(_) | CliError::Io(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<direntropy_core::Error> for CliError {
    fn from(e: direntropy_core::Error) -> Self {
        match e {
            direntropy_core::Error::InvariantViolation(m) => CliError::Invariant(m),
            other => CliError::Precondition(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "direntropy", version, about = "Directional entropy experiments on Z^2 symbolic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment file; the built-in default is used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; all available cores when absent.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Report entropies in nats instead of bits.
    #[arg(long, global = true)]
    pub nats: bool,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Emit the strip sites for each half-width.
    Strip,
    /// Directional entropy rates over the half-width ladder.
    Entropy,
    /// Exact sandwich inclusions and the fiber/directional comparison.
    SkewCheck,
    /// Strip-averaged pair distances and asymptotic tests.
    Chaos,
    /// Entropy-tuple certificates and the asymptotic-pair density probe.
    Tuples,
    /// Invariant suite; exits 3 on any failure.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Strip => "strip",
            Command::Entropy => "entropy",
            Command::SkewCheck => "skew-check",
            Command::Chaos => "chaos",
            Command::Tuples => "tuples",
            Command::Selftest => "selftest",
        }
    }
}

/// Where output goes: the override directory wins over the directory part
/// of the configured path.
fn output_target(cli: &Cli, config: &ExperimentConfig, format: Format) -> Option<PathBuf> {
    let path = cli.out.clone().or_else(|| config.output.path.clone());
    let ext = match format {
        Format::Json => "ndjson",
        Format::Csv => "csv",
    };
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => {
            let name = path
                .as_deref()
                .and_then(Path::file_name)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(format!("{}.{ext}", cli.command.name())));
            Some(PathBuf::from(dir).join(name))
        }
        None => path,
    }
}

/// Runs one invocation and writes its output. Output is written even when
/// the run ends in an invariant failure.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (mut config, base_dir) = match &cli.config {
        Some(p) => (ExperimentConfig::load(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(f) = cli.format {
        config.output.format = f;
    }
    let format = config.output.format;
    let target = output_target(cli, &config, format);
    let resolved = config.resolve(&base_dir)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    let (emitter, status) = pool.install(|| commands::dispatch(cli.command, &resolved, cli.nats))?;
    match target {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            }
            let file = std::fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut w = std::io::BufWriter::new(file);
            emitter.finish(&mut w)?;
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emitter.finish(&mut lock)?;
        }
    }
    status
}
