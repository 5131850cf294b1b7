use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nonlocal_green_cli::emit::to_json;
use nonlocal_green_cli::{run, CliError, Command, RunResult, ScenarioConfig};
use serde::Serialize;

/// Verification suites for nonlocal Green operators on lattice spacetimes.
#[derive(Debug, Parser)]
#[command(name = "nlgreen", version)]
struct Args {
    /// Suite to run.
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for emitted files; created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Serialize)]
struct Failure<'a> {
    name: &'a str,
    value: f64,
    tolerance: f64,
}

fn execute(args: &Args) -> Result<RunResult, CliError> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Write {
        path: args.out.clone(),
        source,
    })?;
    run(&cfg, args.command, &args.out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(jobs) = args.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("nlgreen: cannot set up {jobs} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&args) {
        Ok(result) => {
            for (label, secs) in &result.timings {
                eprintln!("{label}: {secs:.3} s");
            }
            let failures: Vec<Failure<'_>> = result
                .failures()
                .into_iter()
                .map(|c| Failure {
                    name: &c.name,
                    value: c.value,
                    tolerance: c.tolerance,
                })
                .collect();
            eprintln!(
                "{}: {}/{} checks passed",
                args.command.name(),
                result.checks.len() - failures.len(),
                result.checks.len()
            );
            if failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                print!("{}", to_json(&failures).unwrap_or_default());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("nlgreen: {e}");
            let code = e.exit_code();
            if code == 1 {
                let message = e.to_string();
                let failures = [Failure {
                    name: &message,
                    value: f64::NAN,
                    tolerance: f64::NAN,
                }];
                print!("{}", to_json(&failures).unwrap_or_default());
            }
            ExitCode::from(code as u8)
        }
    }
}
