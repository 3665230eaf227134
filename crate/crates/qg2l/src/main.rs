use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qg2l::harness::{cmd_constants, cmd_couple, cmd_replay, cmd_simulate, cmd_verify, load_config, HarnessError};

/// Stochastic two-layer quasi-geostrophic simulator and ergodicity harness.
#[derive(Parser)]
#[command(name = "qg2l", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration file (flat `section.key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config and the QG2_SEED environment.
    #[arg(long, global = true, env = "QG2_SEED")]
    seed: Option<u64>,
    /// Output directory; overrides the config and the QG2_OUT environment.
    #[arg(long, global = true, env = "QG2_OUT")]
    out: Option<PathBuf>,
    /// Worker thread count (0 = all cores). Results are independent of it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate single trajectories or an ensemble; write CSV + checkpoints.
    Simulate,
    /// Run coupled pairs with the feedback control; write per-pair CSV and
    /// an A1/A3 verdict summary.
    Couple,
    /// Verify assumptions A1-A4, measure the contraction factor, and emit
    /// the JSON report.
    Verify,
    /// Compute and print the ergodicity constants and condition flags.
    Constants,
    /// Re-run a manifest and compare artifact checksums bit-exactly.
    Replay {
        /// Path to a manifest.json produced by another command.
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    if let Command::Replay { manifest } = &cli.command {
        return cmd_replay(manifest, cli.out.as_deref(), cli.threads, cli.quiet);
    }
    let config_path = cli.config.as_ref().ok_or_else(|| {
        HarnessError::Config(qg2l::harness::ConfigError::Parse {
            line: 0,
            msg: "--config is required for this command".to_string(),
        })
    })?;
    let mut cfg = load_config(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir));

    let body = || match cli.command {
        Command::Simulate => cmd_simulate(&cfg, &out, cli.quiet),
        Command::Couple => cmd_couple(&cfg, &out, cli.quiet),
        Command::Verify => cmd_verify(&cfg, &out, cli.quiet),
        Command::Constants => cmd_constants(&cfg, &out, cli.quiet),
        Command::Replay { .. } => unreachable!(),
    };
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| HarnessError::Other(format!("thread pool: {e}")))?;
        pool.install(body)
    } else {
        body()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
