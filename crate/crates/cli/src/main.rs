use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use refprior_cli::{execute, Command};

/// Objective reference priors under constraints.
#[derive(Debug, Parser)]
#[command(name = "refprior", version)]
struct Args {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, overriding the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let (report, code) = execute(args.command, &args.config, args.out);
    if let Some(err) = &report.error {
        eprintln!("refprior {}: {}", report.command, err.message);
    }
    ExitCode::from(code as u8)
}
