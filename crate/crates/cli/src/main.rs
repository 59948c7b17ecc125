//! `retrodict`: build Bayesian reverse processes from scenario files and
//! check the fluctuation identities exactly.
//!
//! Exit codes: 0 all identities within tolerance, 2 identity violation,
//! 1 input/configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use retrodiction_cli::error::CliError;
use retrodiction_cli::pipeline::{build_scenario, render_reverse_view, run_pipeline, PipelineOptions};
use retrodiction_cli::report::fmt17;
use retrodiction_cli::schema::parse_scenario_file;
use retrodiction_cli::verify::verify_dir;

#[derive(Parser)]
#[command(
    name = "retrodict",
    about = "Bayesian reverse processes and exact fluctuation-relation checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write joint.csv, measures.csv, summary.json.
    Run {
        /// Scenario file (JSON, schema version 1).
        file: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Seed override for the random scenario kinds.
        #[arg(long)]
        seed: Option<u64>,
        /// Tolerance override applied to both the unit-average and the
        /// atomwise checks (defaults: 1e-10 and 1e-9).
        #[arg(long)]
        tol: Option<f64>,
        /// Also write one SVG stem plot of the measures per family.
        #[arg(long)]
        plot: bool,
    },
    /// Print the steady state and the reverse transition of a scenario.
    Reverse {
        file: PathBuf,
        /// Seed override for the random scenario kinds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recheck the identities of an emitted run directory from its files.
    Verify { dir: PathBuf },
    /// Run every *.json scenario file in a directory.
    Batch {
        dir: PathBuf,
        /// Root output directory; each file writes to <out>/<stem>/.
        #[arg(long)]
        out: PathBuf,
        /// Seed override for the random scenario kinds.
        #[arg(long)]
        seed: Option<u64>,
        /// Tolerance override, as in `run`.
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run {
            file,
            out,
            seed,
            tol,
            plot,
        } => {
            let scenario = parse_scenario_file(&file)?;
            let options = PipelineOptions {
                seed_override: seed,
                tol_override: tol,
                plot,
            };
            let report = run_pipeline(&scenario, &out, &options)?;
            for family in &report.families {
                println!(
                    "{}: jarzynski_residual={} max_crooks_residual={}",
                    family.family,
                    fmt17(family.jarzynski_residual),
                    fmt17(family.max_crooks_residual)
                );
            }
            println!(
                "{} -> {} ({})",
                file.display(),
                out.display(),
                if report.pass { "pass" } else { "IDENTITY VIOLATION" }
            );
            Ok(if report.pass {
                ExitCode::from(0)
            } else {
                ExitCode::from(2)
            })
        }
        Command::Reverse { file, seed } => {
            let scenario = parse_scenario_file(&file)?;
            let built = build_scenario(&scenario, seed)?;
            print!("{}", render_reverse_view(&built.reverse_view));
            Ok(ExitCode::from(0))
        }
        Command::Verify { dir } => {
            let outcome = verify_dir(&dir)?;
            for line in &outcome.lines {
                println!("{line}");
            }
            println!(
                "verify {}: {}",
                dir.display(),
                if outcome.ok() { "pass" } else { "FAIL" }
            );
            Ok(if outcome.ok() {
                ExitCode::from(0)
            } else {
                ExitCode::from(2)
            })
        }
        Command::Batch {
            dir,
            out,
            seed,
            tol,
        } => {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| retrodiction_cli::error::io_err(&dir, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "json").unwrap_or(false))
                .collect();
            entries.sort();
            if entries.is_empty() {
                return Err(CliError::Schema {
                    message: format!("no *.json scenario files in {}", dir.display()),
                });
            }
            let mut worst = 0u8;
            for path in entries {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| "scenario".into());
                let target = out.join(&stem);
                let options = PipelineOptions {
                    seed_override: seed,
                    tol_override: tol,
                    plot: false,
                };
                match parse_scenario_file(&path).and_then(|sf| run_pipeline(&sf, &target, &options))
                {
                    Ok(report) => {
                        println!(
                            "{}: {}",
                            path.display(),
                            if report.pass { "pass" } else { "IDENTITY VIOLATION" }
                        );
                        if !report.pass {
                            worst = worst.max(2);
                        }
                    }
                    Err(err) => {
                        eprintln!("{}", err.to_json());
                        println!("{}: ERROR", path.display());
                        worst = worst.max(1);
                    }
                }
            }
            Ok(ExitCode::from(worst))
        }
    }
}
