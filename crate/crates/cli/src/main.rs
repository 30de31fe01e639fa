use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use perfrac::harness::{self, Mode};

#[derive(Parser, Debug)]
#[command(name = "perfrac", version, about = "Phase-field fracture in periodically perforated media")]
struct Cli {
    /// One of: cell, homog-run, fine-run, validate, mms
    mode: Mode,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `run.out`)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = harness::load_config(&cli.config, cli.mode, cli.out.as_deref()).and_then(|c| {
        log::info!("resolved configuration:\n{}", c.serialize());
        harness::run(&c)
    });
    match result {
        Ok(report) => {
            if !cli.quiet {
                for line in &report.summary {
                    println!("{line}");
                }
                for f in &report.files {
                    println!("wrote {}", f.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
