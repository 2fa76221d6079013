use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scsf_cli::{parse_config, replay, run_experiment, Exit};
use scsf_core::singularity::TypeThresholds;

/// Space curve shortening flow experiments.
#[derive(Parser)]
#[command(name = "scsf", version)]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config, then print it with defaults filled in.
    Check { config: PathBuf },
    /// Re-run the singularity analysis and monitors on a saved trace.csv.
    Replay {
        trace: PathBuf,
        /// Write report.txt and singularity.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn code(e: Exit) -> ExitCode {
    ExitCode::from(e as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match cli.command {
        Command::Check { config } => match parse_config(&config) {
            Ok(cfg) => {
                if !cli.quiet {
                    print!("{}", cfg.echo());
                }
                code(Exit::Ok)
            }
            Err(e) => {
                eprintln!("error: {}: {e}", config.display());
                code(Exit::Config)
            }
        },
        Command::Run { config, out } => {
            let mut cfg = match parse_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return code(Exit::Config);
                }
            };
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            match run_experiment(&cfg, cli.quiet) {
                Ok(outcome) => {
                    if !cli.quiet {
                        print!("{}", outcome.report);
                    }
                    for v in &outcome.violations {
                        eprintln!("violation: {v}");
                    }
                    code(outcome.exit)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(e.exit())
                }
            }
        }
        Command::Replay { trace, out } => match replay(&trace, &TypeThresholds::default()) {
            Ok(outcome) => {
                if let Some(dir) = out {
                    let written = std::fs::create_dir_all(&dir)
                        .and_then(|_| std::fs::write(dir.join("report.txt"), &outcome.report))
                        .map_err(|e| e.to_string())
                        .and_then(|_| match &outcome.singularity {
                            Some(s) => scsf_cli::trace_io::write_singularity_csv(&dir.join("singularity.csv"), s)
                                .map_err(|e| e.to_string()),
                            None => Ok(()),
                        });
                    if let Err(e) = written {
                        eprintln!("error: {}: {e}", dir.display());
                        return code(Exit::Io);
                    }
                }
                if !cli.quiet {
                    print!("{}", outcome.report);
                }
                code(outcome.exit)
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(Exit::Config)
            }
        },
    }
}
