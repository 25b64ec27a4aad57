//! `privsched`: run the uplink privacy simulator from the command line.
//!
//! Exit codes: 0 on success, 1 for configuration errors (the message names
//! the offending key), 2 for runtime failures such as I/O.

mod bundle;
mod config;
mod presets;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::bundle::Bundle;
use crate::config::{Preset, Settings, SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<privsched::Error> for CliError {
    fn from(e: privsched::Error) -> Self {
        match e {
            privsched::Error::Config { key, reason } => CliError::config(key, reason),
            privsched::Error::NoFiniteMargin => CliError::config("gamma", e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "privsched",
    version,
    about = "Private/open uplink scheduling simulator"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// key=value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel sweeps (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override one config key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// One dynamic-control run (metrics, per-node rates, optional trace)
    Run {
        /// Also write the per-block trace.csv
        #[arg(long)]
        trace: bool,
    },
    /// Regenerate a figure's data: region-single, region-pos, sweep-V, sweep-n, sweep-kappa, sweep-gamma, sweep-sigma
    Preset { name: String },
    /// Single-user separate and joint rate regions
    Region,
    /// POS profile and sum-rate outer bound
    Pos,
    /// POS private rate against the dynamic controller
    Compare,
    /// List the config keys
    Keys,
}

fn execute(cli: Cli) -> Result<String, CliError> {
    if let Verb::Keys = cli.verb {
        return Ok(SCHEMA
            .iter()
            .map(|(k, d)| format!("{k:16} {d}"))
            .collect::<Vec<_>>()
            .join("\n"));
    }
    let mut settings = Settings::defaults();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        settings.merge_text(&text)?;
    }
    for kv in &cli.set {
        settings.merge_assignment(kv)?;
    }
    let verb_preset = match &cli.verb {
        Verb::Preset { name } => Some(
            Preset::parse(name)
                .ok_or_else(|| CliError::config("preset", format!("unknown preset `{name}`")))?,
        ),
        _ => None,
    };
    if let Some(p) = verb_preset {
        settings.set("preset", p.name())?;
    }
    if let Some(seed) = cli.seed {
        settings.set("seed", &seed.to_string())?;
    }
    let resolved = settings.resolve()?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::config("workers", "must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    let mut bundle = Bundle::create(&cli.out)?;
    let (verb, summary) = match cli.verb {
        Verb::Run { trace } => ("run", presets::run_verb(&resolved, &mut bundle, trace)?),
        Verb::Region => ("region", presets::region_verb(&resolved, &mut bundle)?),
        Verb::Pos => ("pos", presets::pos_verb(&resolved, &mut bundle)?),
        Verb::Compare => ("compare", presets::compare_verb(&resolved, &mut bundle)?),
        Verb::Preset { .. } => {
            let p = resolved.preset.expect("preset set above");
            ("preset", presets::run_preset(p, &resolved, &mut bundle)?)
        }
        Verb::Keys => unreachable!(),
    };
    let hash = bundle.finish(verb, &resolved.to_string())?;
    Ok(format!(
        "{summary}\nconfig hash {hash}\noutputs in {}",
        cli.out.display()
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(summary) => {
            let _ = writeln!(std::io::stdout(), "{}", summary.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("privsched: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
