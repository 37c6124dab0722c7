use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sambe_cli::config::RunConfig;
use sambe_cli::output::{resolve_output_dir, OutputDir};
use sambe_cli::{accept, commands, CliError};

/// Driven Dirac models: bands, bulk invariants, edge conductivities, propagator errors and averaging.
#[derive(Parser)]
#[command(name = "sambe", version)]
struct Cli {
    /// TOML configuration with one table per command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set invariant.n=2`. May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides SAMBE_OUTPUT_DIR and the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band structure on a momentum grid (bands.csv).
    Bands,
    /// Bulk-difference invariant with ring contributions (invariant.json).
    Invariant,
    /// Ribbon edge spectrum and spectral-flow conductivity (edge.csv, sigma.json).
    Edge,
    /// Truncation, corrector and long-time error sweeps (evolve_sweep.csv, slopes.json).
    Evolve,
    /// High-frequency averaging data and error rate (averaging.csv, effective.json).
    Average,
    /// Full acceptance suite (acceptance_report.json); exits with 4 if any criterion fails.
    Accept,
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(threads) = cli.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure {threads} threads: {e}")))?;
    }
    if let Command::ShowConfig = cli.command {
        return toml::to_string_pretty(&cfg).map_err(|e| CliError::Config(e.to_string()));
    }
    let out = OutputDir::create(resolve_output_dir(cli.out.as_deref(), cfg.output_dir.as_deref()))?;
    match cli.command {
        Command::Bands => commands::cmd_bands(&cfg, &out),
        Command::Invariant => commands::cmd_invariant(&cfg, &out),
        Command::Edge => commands::cmd_edge(&cfg, &out),
        Command::Evolve => commands::cmd_evolve(&cfg, &out),
        Command::Average => commands::cmd_average(&cfg, &out),
        Command::Accept => accept::cmd_accept(&cfg, &out),
        Command::ShowConfig => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sambe: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
