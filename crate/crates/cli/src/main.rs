use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robin_lab::oracle::{format_lines, oracle_lines};
use robin_lab::run::{summarize_json, summarize_text};
use robin_lab::{read_manifest, run, ExperimentConfig, LabError, RunOptions};

#[derive(Parser)]
#[command(name = "robin-lab", version, about = "Robin function and Lambda-metric experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured checks and write artifacts plus a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize a finished run directory.
    Summarize {
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Recompute the closed-form reference values.
    Oracle {
        /// Skip the collocation reproduction of the ball centre value.
        #[arg(long)]
        fast: bool,
    },
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn fail(e: LabError) -> ExitCode {
    eprintln!("error: {e}");
    exit(e.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match ExperimentConfig::load(&config).and_then(|c| c.validate().map(|_| c)) {
            Ok(c) => {
                println!("ok: {} check(s) on n = {}", c.checks.len(), c.domain.n);
                exit(0)
            }
            Err(e) => fail(e),
        },
        Command::Run { config, out, seed, jobs } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match run(&cfg, &RunOptions { out, seed, jobs }) {
                Ok(m) => {
                    print!("{}", summarize_text(&m));
                    exit(m.exit_code())
                }
                Err(e) => fail(e),
            }
        }
        Command::Summarize { dir, out, json } => {
            let Some(dir) = dir.or(out) else {
                eprintln!("error: summarize needs a run directory");
                return exit(2);
            };
            match read_manifest(&dir) {
                Ok(m) => {
                    if json {
                        println!("{}", serde_json::to_string_pretty(&summarize_json(&m)).expect("json"));
                    } else {
                        print!("{}", summarize_text(&m));
                    }
                    exit(0)
                }
                Err(e) => fail(e),
            }
        }
        Command::Oracle { fast } => match oracle_lines(!fast) {
            Ok(lines) => {
                print!("{}", format_lines(&lines));
                exit(if lines.iter().all(|l| l.pass) { 0 } else { 1 })
            }
            Err(e) => fail(e),
        },
    }
}
