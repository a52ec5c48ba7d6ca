//! Command-line driver: field generation, simulation, cycle runs, metrics,
//! benchmarks and the self-test.

pub mod commands;
pub mod config;
pub mod error;
pub mod selftest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{BenchRestorer, Format, Suite};
use config::RunConfig;
use error::{CliError, CliResult, ExitCode};

#[derive(Debug, Parser)]
#[command(
    name = "turbkit",
    version,
    about = "Turbulence simulation, estimation and restoration for infrared video"
)]
pub struct Cli {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: the configuration's io.out_dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "TURBKIT_THREADS")]
    pub threads: Option<usize>,
    /// Extra export format for frames and heatmaps. TBT is always written.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tbt)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a turbulence field.
    GenField,
    /// Render a scene over the field and degrade it.
    Simulate,
    /// Measure, restore and re-measure a degraded sequence.
    Cycle,
    /// Run the invariant suite.
    Selftest {
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<selftest::Fault>,
    },
    /// Per-frame image metrics of one TBT sequence against another.
    Metrics {
        #[arg(long)]
        restored: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Run the cycle over a benchmark suite.
    Bench {
        #[arg(long, value_enum, default_value_t = Suite::Standard)]
        suite: Suite,
        #[arg(long, value_enum, default_value_t = BenchRestorer::Temporal)]
        restorer: BenchRestorer,
    },
    /// Print the effective configuration as JSON.
    Config,
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg = cfg.with_base_seed(s);
    }
    commands::resolve_out(&mut cfg, cli.out.clone());
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::GenField => commands::gen_field(&load_config(cli)?, cli.format),
        Command::Simulate => commands::simulate(&load_config(cli)?, cli.format),
        Command::Cycle => commands::cycle(&load_config(cli)?, cli.format),
        Command::Selftest { inject_fault } => {
            let results = selftest::run(*inject_fault);
            for r in &results {
                println!(
                    "{:<4} {:<26} {:>7.2}s  {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.seconds,
                    r.detail
                );
            }
            let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
            if failed.is_empty() {
                Ok(format!("{} checks passed", results.len()))
            } else {
                Err(CliError::selftest(format!("failed invariants: {}", failed.join(", "))))
            }
        }
        Command::Metrics { restored, reference } => commands::metrics(restored, reference, cli.out.as_deref()),
        Command::Bench { suite, restorer } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("bench"));
            commands::bench(*suite, *restorer, cli.seed, &out)
        }
        Command::Config => Ok(serde_json::to_string_pretty(&load_config(cli)?)?),
    }
}

/// Run a parsed command and return the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    let pool = match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::Config;
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::Config;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::Success
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
