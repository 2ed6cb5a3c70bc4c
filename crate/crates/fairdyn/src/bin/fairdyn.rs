//! Experiment runner CLI. All logic lives in the library; this binary only
//! parses arguments and reports errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fairdyn::config::{run_experiment, Preset};
use fairdyn::ingest::{ingest, IngestConfig};
use fairdyn::ExperimentConfig;

#[derive(Parser)]
#[command(name = "fairdyn", version, about = "Multi-agent fair selection dynamics simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a built-in figure preset.
    Preset {
        /// Preset name, e.g. fig1a.
        name: String,
        /// Output directory (default: out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// key=value config overrides, e.g. lambda=2.0 or policy=cmfg.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Fit per-group score distributions from a tabular dataset.
    Ingest {
        /// Input table (delimited text with a header row).
        #[arg(long)]
        input: PathBuf,
        /// TOML file with the column-role mapping.
        #[arg(long)]
        config: PathBuf,
        /// Output file for the fitted per-group parameters.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> fairdyn::Result<()> {
    match command {
        Command::Run { config } => {
            let config = ExperimentConfig::from_path(&config)?;
            let artifacts = run_experiment(&config)?;
            println!(
                "wrote {} ({} rounds, {} instances, equilibrium {:.4}, converged: {})",
                artifacts.output_dir.display(),
                config.horizon,
                config.instances,
                artifacts.equilibrium,
                artifacts.converged,
            );
        }
        Command::Preset { name, out, overrides } => {
            let preset = Preset::from_name(&name)?;
            let mut config = preset.config();
            for entry in &overrides {
                let (key, value) =
                    entry.split_once('=').ok_or_else(|| fairdyn::Error::InvalidConfig {
                        field: "override".into(),
                        reason: format!("expected key=value, got `{entry}`"),
                    })?;
                config.apply_override(key.trim(), value.trim())?;
            }
            if let Some(dir) = out {
                config.output_dir = dir;
            }
            let artifacts = run_experiment(&config)?;
            println!(
                "{name}: wrote {} (equilibrium {:.4}, converged: {})",
                artifacts.output_dir.display(),
                artifacts.equilibrium,
                artifacts.converged,
            );
        }
        Command::Ingest { input, config, out } => {
            let text = fs::read_to_string(&config)?;
            let ingest_config: IngestConfig =
                toml::from_str(&text).map_err(|e| fairdyn::Error::InvalidConfig {
                    field: "ingest config".into(),
                    reason: e.to_string(),
                })?;
            let file = fs::File::open(&input)?;
            let dists = ingest(file, &ingest_config)?;
            let serialized =
                toml::to_string_pretty(&dists).map_err(|e| fairdyn::Error::Ingest(e.to_string()))?;
            fs::write(&out, serialized)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
