use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cluster_tails::{run_file, validate_file, CliError, RunOptions};

#[derive(Parser)]
#[command(
    name = "cluster-tails",
    version,
    about = "Tail experiments for marked Poisson cluster processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config (or rerun a manifest).
    Run {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Validate a config and print the derived model constants.
    Validate { config: PathBuf },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.kind.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            workers,
            output_dir,
        } => {
            let opts = RunOptions {
                workers,
                output_dir,
                cache_dir: None,
            };
            match run_file(&config, &opts) {
                Ok(out) => {
                    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Validate { config } => match validate_file(&config) {
            Ok(report) => {
                println!("{}", serde_json::to_string_pretty(&report).expect("json"));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
