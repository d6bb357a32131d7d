use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use surrofit_cli::config::parse_config;
use surrofit_cli::runner::{run, RunOptions};

/// Config-driven experiment runner: one experiment per config file, CSV and
/// manifest outputs with full seed and oracle provenance.
#[derive(Parser, Debug)]
#[command(name = "surrofit", version, about)]
struct Cli {
    /// Path to the experiment config (JSON).
    config: PathBuf,

    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,

    /// Size of the worker pool for replications (default: all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Validate the config and exit without running.
    #[arg(long)]
    validate_only: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "stage": "read-config", "message": e.to_string() } })
            );
            return ExitCode::from(2);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "stage": "parse-config", "messages": errors } })
            );
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.display().to_string();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.validate_only {
        println!("{}", serde_json::json!({ "valid": true, "kind": cfg.kind.as_str() }));
        return ExitCode::SUCCESS;
    }
    match run(&cfg, &RunOptions { threads: cli.threads }) {
        Ok(manifest) => {
            println!(
                "{}",
                serde_json::json!({
                    "ok": true,
                    "kind": cfg.kind.as_str(),
                    "output_dir": cfg.output_dir,
                    "outputs": manifest.outputs,
                    "warnings": manifest.warnings,
                    "wall_clock_seconds": manifest.wall_clock_seconds,
                })
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "stage": e.stage(), "message": e.to_string() } })
            );
            ExitCode::FAILURE
        }
    }
}
