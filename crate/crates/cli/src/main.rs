use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use radon_lab::config::ExperimentKind;
use radon_lab::error::CliError;
use radon_lab::{execute, RunRequest};

/// Runs one experiment and writes CSV tables, JSON documents and a
/// manifest into the output directory.
#[derive(Debug, Parser)]
#[command(name = "radon-lab", version)]
struct Args {
    /// uniformity, minor-decay, gauss-decay, decompose, factorize,
    /// identities or dirichlet-audit
    experiment: String,
    /// JSON config; defaults apply to every field left out
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default `out/<experiment>`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: Args) -> Result<i32, CliError> {
    let kind: ExperimentKind = args.experiment.parse()?;
    let config_text = match &args.config {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    let outcome = execute(&RunRequest { kind, config_text, out: args.out, seed: args.seed, threads: args.threads })?;
    for c in &outcome.report.checks {
        println!(
            "{} {} value={:e} threshold={:e} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold,
            c.detail
        );
    }
    println!("wrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("radon-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
