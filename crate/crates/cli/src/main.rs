use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use didolocus::cli_io::{run_to_dir, COMMANDS};
use didolocus::RunConfig;

/// Geodesics, conjugate loci and strata of isoperimetric sub-Riemannian metrics.
#[derive(Parser, Debug)]
#[command(name = "didolocus", version)]
struct Args {
    /// One of: geodesic, front, conjugate, section, asymptotic, classify, stratify, sweep, compare
    command: String,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("didolocus: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(args: &Args) -> anyhow::Result<Vec<PathBuf>> {
    if !COMMANDS.contains(&args.command.as_str()) {
        bail!("unknown command '{}' (expected one of {})", args.command, COMMANDS.join(", "));
    }
    let cfg = RunConfig::from_file(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    run_to_dir(&args.command, &cfg, &args.out).with_context(|| format!("command '{}'", args.command))
}
