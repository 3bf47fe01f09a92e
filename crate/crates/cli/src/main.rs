//! `nlsh` — command-line driver for the integrable NLS hierarchy library.

mod artifacts;
mod commands;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::Deserialize;

use commands::{GenerateArgs, IllposedArgs, ProbeArgs, RerunArgs, SimulateArgs, VerifyArgs};

#[derive(Debug, Parser)]
#[command(
    name = "nlsh",
    version,
    about = "Generate, verify, simulate, and probe the integrable NLS hierarchy",
    after_help = "Exit codes:\n  \
        0  success\n  \
        1  verification mismatch (a check failed or a rerun was not byte-identical)\n  \
        2  usage error (bad flags, bad config, invalid input files)\n  \
        3  numeric abort (the integrator produced non-finite values)\n\n\
        Environment:\n  \
        NLS_HIERARCHY_CACHE_DIR  directory for cached recursion generators"
)]
pub struct Cli {
    /// TOML file with default parameters (see config.example.toml)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Print and save hierarchy equations, raw flows, or torus equations
    Generate(GenerateArgs),
    /// Run exact self-checks and the numeric residual oracle
    Verify(VerifyArgs),
    /// Integrate an equation from a chosen initial condition
    Simulate(SimulateArgs),
    /// Tabulate the norm-separation and resonance obstructions
    Illposed(IllposedArgs),
    /// Monte-Carlo estimate of a space-time ratio across a dilation sweep
    Probe(ProbeArgs),
    /// Re-execute a recorded run and compare output digests
    Rerun(RerunArgs),
}

/// Errors mapped onto the documented exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Mismatch(String),
    Numeric(String),
    Tool(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Mismatch(_) => 1,
            CliError::Numeric(_) => 3,
            CliError::Tool(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Mismatch(msg) => write!(f, "verification mismatch: {msg}"),
            CliError::Numeric(msg) => write!(f, "numeric abort: {msg}"),
            CliError::Tool(err) => write!(f, "{err:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Tool(err)
    }
}

/// Optional config-file defaults.  Flags always win; these fill the gap
/// between "flag given" and "built-in default".
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub simulate: SimulateDefaults,
    pub probe: ProbeDefaults,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateDefaults {
    pub length: Option<f64>,
    pub points: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub stride: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeDefaults {
    pub samples: Option<usize>,
    pub band: Option<u32>,
    pub window_cycles: Option<f64>,
    pub time_samples: Option<usize>,
    pub lambdas: Option<Vec<u32>>,
}

fn load_config(path: Option<&PathBuf>) -> Result<Config, CliError> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|err| CliError::Usage(format!("cannot read config {}: {err}", path.display())))?;
    toml::from_str(&text)
        .map_err(|err| CliError::Usage(format!("invalid config {}: {err}", path.display())))
}

pub(crate) fn dispatch(command: Command, config: &Config) -> Result<(), CliError> {
    match command {
        Command::Generate(args) => commands::generate(&args),
        Command::Verify(args) => commands::verify(&args),
        Command::Simulate(args) => commands::simulate(&args, config),
        Command::Illposed(args) => commands::illposed(&args),
        Command::Probe(args) => commands::probe(&args, config),
        Command::Rerun(args) => commands::rerun(&args, |inner| dispatch(inner, config)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(cli.config.as_ref()).and_then(|config| dispatch(cli.command, &config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
