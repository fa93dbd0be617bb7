//! `odnmr`: run configured experiments, regenerate reference figures, and
//! print the config schema.

mod commands;
mod config;
mod error;
mod output;
mod plot;
mod reproduce;
mod units;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{RunContext, TableFormat};
use config::RunConfig;
use error::CliError;

const SCHEMA: &str = include_str!("../schema/config.schema.json");

#[derive(Parser)]
#[command(
    name = "odnmr",
    version,
    about = "NV-13C Landau-Zener sweep simulation and ODNMR analysis toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and ODNMR_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for grid evaluation.
        #[arg(long)]
        threads: Option<usize>,
        /// Table output format.
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Regenerate a built-in reference figure.
    Reproduce {
        /// One of: fig1d, figA2, figA3, figA4, figA5, figA6, fig2d-synth,
        /// fig3e-synth.
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the JSON schema of the run config format.
    Schema,
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
            format,
        } => {
            configure_threads(threads)?;
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::Io {
                message: format!("{}: {e}", config.display()),
            })?;
            let parsed = RunConfig::from_json(&text)?;
            let ctx = RunContext {
                out_dir: output::resolve_out_dir(out.as_deref(), parsed.output.as_deref()),
                seed: seed.or(parsed.seed).unwrap_or(0),
                plot: parsed.plot,
                format: match format {
                    FormatArg::Csv => TableFormat::Csv,
                    FormatArg::Json => TableFormat::Json,
                },
            };
            let summary = commands::run_experiment(&parsed.experiment, &parsed.params, &ctx)?;
            print_line(&summary);
            Ok(())
        }
        Command::Reproduce {
            id,
            out,
            seed,
            threads,
        } => {
            configure_threads(threads)?;
            let ctx = RunContext {
                out_dir: output::resolve_out_dir(out.as_deref(), None),
                seed: seed.unwrap_or(0),
                plot: true,
                format: TableFormat::Csv,
            };
            let summary = reproduce::reproduce(&id, &ctx)?;
            print_line(&summary);
            Ok(())
        }
        Command::Schema => {
            print_line(SCHEMA);
            Ok(())
        }
    }
}

/// Write to stdout without panicking on a closed pipe.
fn print_line(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
