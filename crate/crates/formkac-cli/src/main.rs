//! Command-line experiment runner.
//!
//! Exit codes: 0 on success, 2 when an experiment verdict fails, 1 on
//! configuration or runtime errors.

use clap::{Parser, Subcommand};
use formkac::config::ExperimentConfig;
use formkac::runner::{list_models_json, list_models_text, run_experiment};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "formkac", version, about = "Monte Carlo engine and oracle suite for heat semigroups on differential forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run {
        /// Path to the TOML experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker count (falls back to FORMKAC_THREADS, then to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Replace the config seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Print the model catalog.
    ListModels {
        /// Emit machine-readable JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the quick algebraic identity suite.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed_override,
        } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(1);
                }
            };
            let mut cfg = match ExperimentConfig::from_str(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            if let Some(seed) = seed_override {
                cfg.seed = Some(seed);
            }
            let threads = threads.or_else(|| {
                std::env::var("FORMKAC_THREADS")
                    .ok()
                    .and_then(|v| v.parse().ok())
            });
            let out_dir = out
                .or_else(|| cfg.out_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            match run_experiment(&cfg, &out_dir, threads) {
                Ok(outcome) => {
                    for v in &outcome.summary.verdicts {
                        println!(
                            "{}: {} ({})",
                            if v.pass { "PASS" } else { "FAIL" },
                            v.name,
                            v.detail
                        );
                    }
                    println!(
                        "wrote {} rows to {} in {:.2}s",
                        outcome.rows.len(),
                        out_dir.join("results.csv").display(),
                        outcome.summary.wall_time_s
                    );
                    if outcome.summary.all_pass {
                        ExitCode::from(0)
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::ListModels { json } => {
            if json {
                match list_models_json() {
                    Ok(text) => println!("{text}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                }
            } else {
                print!("{}", list_models_text());
            }
            ExitCode::from(0)
        }
        Command::Selftest => {
            let cfg = match ExperimentConfig::from_str(
                "[experiment]\nkind = \"algebra-suite\"\nseed = 1\n",
            ) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let dir = std::env::temp_dir().join(format!("formkac-selftest-{}", std::process::id()));
            match run_experiment(&cfg, &dir, None) {
                Ok(outcome) => {
                    let failures: Vec<_> = outcome
                        .summary
                        .verdicts
                        .iter()
                        .filter(|v| !v.pass)
                        .collect();
                    println!(
                        "selftest: {} identities checked, {} failures",
                        outcome.rows.len(),
                        failures.len()
                    );
                    let _ = std::fs::remove_dir_all(&dir);
                    if failures.is_empty() {
                        ExitCode::from(0)
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
