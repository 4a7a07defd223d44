//! Command-line front end: load a scenario, apply overrides, run one
//! simulation or a burst-interval sweep, and write the report files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 invariant violation,
//! 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use lvapsim::metrics::GapMode;
use lvapsim::runner::{apply_overrides, run_scenario, run_sweep, Overrides, RunError};
use lvapsim::scenario::{Scenario, ScenarioError};

#[derive(Parser, Debug)]
#[command(name = "lvapsim", version, about = "LVAP handoff simulator")]
struct Args {
    /// Scenario file (TOML)
    #[arg(long)]
    scenario: PathBuf,

    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory for report files
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Override the CSA burst beacon interval in milliseconds; under
    /// --sweep this replaces the default sweep list with one value
    #[arg(long, value_name = "MS")]
    burst_interval: Option<u32>,

    /// Device profile override (fastcard, midcard, slowcard); repeat the
    /// flag under --sweep to run several profiles
    #[arg(long)]
    profile: Vec<String>,

    /// Run one simulation per burst interval and combine the summaries
    #[arg(long)]
    sweep: bool,

    /// Handoff gap anchor: last-received (default) or first-lost
    #[arg(long, value_name = "MODE")]
    gap_mode: Option<String>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_IO: u8 = 4;

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("lvapsim: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let args = Args::parse();

    let gap_mode = match &args.gap_mode {
        None => None,
        Some(s) => match GapMode::parse(s) {
            Some(m) => Some(m),
            None => {
                return fail(
                    EXIT_CONFIG,
                    &format!("--gap-mode must be last-received or first-lost, got {s:?}"),
                )
            }
        },
    };
    if !args.sweep && args.profile.len() > 1 {
        return fail(EXIT_CONFIG, "--profile given more than once without --sweep");
    }

    let (mut scn, warnings) = match Scenario::load(&args.scenario) {
        Ok(ok) => ok,
        Err(ScenarioError::Io(e)) => {
            return fail(EXIT_IO, &format!("{}: {e}", args.scenario.display()))
        }
        Err(e) => return fail(EXIT_CONFIG, &e.to_string()),
    };
    for w in &warnings {
        eprintln!("lvapsim: warning: {w}");
    }

    let overrides = Overrides {
        seed: args.seed,
        burst_interval_ms: if args.sweep { None } else { args.burst_interval },
        profile: if args.sweep {
            None
        } else {
            args.profile.first().cloned()
        },
        gap_mode,
    };
    if let Err(e) = apply_overrides(&mut scn, &overrides) {
        return fail(EXIT_CONFIG, &e.to_string());
    }

    if args.sweep {
        let bursts: Vec<u32> = args.burst_interval.into_iter().collect();
        match run_sweep(&scn, &args.profile, &bursts, &args.out) {
            Ok(rows) => {
                println!(
                    "sweep complete: {} runs, combined summary at {}",
                    rows.len(),
                    args.out.join("summary.csv").display()
                );
                ExitCode::SUCCESS
            }
            Err(RunError::Config(e)) => fail(EXIT_CONFIG, &e),
            Err(e @ RunError::Violation(_)) => fail(EXIT_VIOLATION, &e.to_string()),
            Err(RunError::Io(e)) => fail(EXIT_IO, &e.to_string()),
        }
    } else {
        match run_scenario(&scn, &args.out) {
            Ok(outcome) => {
                if !outcome.violations.is_empty() {
                    for v in &outcome.violations {
                        eprintln!("lvapsim: violation: {v}");
                    }
                    return ExitCode::from(EXIT_VIOLATION);
                }
                let row = &outcome.report.summary[0];
                println!(
                    "run complete: {} handoffs measured, total loss {:.2}%, reports at {}",
                    outcome.report.measurements.len(),
                    row.total_loss_pct,
                    args.out.display()
                );
                ExitCode::SUCCESS
            }
            Err(RunError::Config(e)) => fail(EXIT_CONFIG, &e),
            Err(e @ RunError::Violation(_)) => fail(EXIT_VIOLATION, &e.to_string()),
            Err(RunError::Io(e)) => fail(EXIT_IO, &e.to_string()),
        }
    }
}
