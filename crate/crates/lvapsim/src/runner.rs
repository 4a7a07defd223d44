//! Run orchestration: apply command-line overrides to a loaded scenario,
//! execute single runs, and drive burst-interval sweeps with a combined
//! summary table.

use std::path::Path;

use thiserror::Error;

use crate::metrics::{emit_reports, render_summary_csv, GapMode, RunReport, SummaryRow};
use crate::scenario::Scenario;
use crate::sim::World;
use crate::types::{BeaconPolicy, DeviceProfile};

/// The burst intervals exercised when `--sweep` is given without an
/// explicit list, in milliseconds.
pub const DEFAULT_SWEEP_BURSTS_MS: [u32; 6] = [5, 10, 20, 30, 40, 50];

/// Command-line overrides; each one, when set, wins over the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub burst_interval_ms: Option<u32>,
    pub profile: Option<String>,
    pub gap_mode: Option<GapMode>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("invariant violations: {}", .0.join("; "))]
    Violation(Vec<String>),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub fn builtin_profile(name: &str) -> Option<DeviceProfile> {
    match name {
        "fastcard" => Some(DeviceProfile::fastcard()),
        "midcard" => Some(DeviceProfile::midcard()),
        "slowcard" => Some(DeviceProfile::slowcard()),
        _ => None,
    }
}

pub fn apply_overrides(scn: &mut Scenario, ov: &Overrides) -> Result<(), RunError> {
    if let Some(seed) = ov.seed {
        scn.seed = seed;
    }
    if let Some(burst) = ov.burst_interval_ms {
        set_burst(scn, burst)?;
    }
    if let Some(name) = &ov.profile {
        set_profile(scn, name)?;
    }
    if let Some(mode) = ov.gap_mode {
        scn.gap_mode = mode;
    }
    Ok(())
}

fn set_burst(scn: &mut Scenario, burst_ms: u32) -> Result<(), RunError> {
    let p = &scn.beacons.policy;
    scn.beacons.policy = BeaconPolicy::new(p.interval_normal_ms, f64::from(burst_ms), p.burst_count)
        .map_err(|e| RunError::Config(e.to_string()))?;
    Ok(())
}

fn set_profile(scn: &mut Scenario, name: &str) -> Result<(), RunError> {
    let profile = builtin_profile(name)
        .ok_or_else(|| RunError::Config(format!("unknown profile {name:?}")))?;
    for sta in &mut scn.stas {
        sta.profile = profile.clone();
    }
    Ok(())
}

/// Result of one run: the report is always written before violations are
/// surfaced, so failed runs still leave evidence on disk.
pub struct RunOutcome {
    pub report: RunReport,
    pub violations: Vec<String>,
}

pub fn run_scenario(scn: &Scenario, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let mut world = World::new(scn);
    world.run();
    let (report, violations) = world.finalize();
    emit_reports(out_dir, &report)?;
    Ok(RunOutcome { report, violations })
}

/// One simulation per (profile, burst) pair, same seed throughout; each
/// run gets its own subdirectory and the combined summary accumulates at
/// `out_dir/summary.csv`, rewritten after every run so an aborted sweep
/// keeps its partial results.
pub fn run_sweep(
    base: &Scenario,
    profiles: &[String],
    bursts: &[u32],
    out_dir: &Path,
) -> Result<Vec<SummaryRow>, RunError> {
    let bursts: Vec<u32> = if bursts.is_empty() {
        DEFAULT_SWEEP_BURSTS_MS.to_vec()
    } else {
        bursts.to_vec()
    };
    let profile_passes: Vec<Option<String>> = if profiles.is_empty() {
        vec![None]
    } else {
        profiles.iter().cloned().map(Some).collect()
    };

    std::fs::create_dir_all(out_dir)?;
    let mut rows: Vec<SummaryRow> = Vec::new();
    for profile in &profile_passes {
        for &burst in &bursts {
            let mut scn = base.clone();
            set_burst(&mut scn, burst)?;
            if let Some(name) = profile {
                set_profile(&mut scn, name)?;
            }
            let sub = match profile {
                Some(name) => format!("{name}_b{burst}"),
                None => format!("b{burst}"),
            };
            let outcome = run_scenario(&scn, &out_dir.join(sub))?;
            rows.extend(outcome.report.summary.iter().cloned());
            std::fs::write(out_dir.join("summary.csv"), render_summary_csv(&rows))?;
            if !outcome.violations.is_empty() {
                return Err(RunError::Violation(outcome.violations));
            }
        }
    }
    Ok(rows)
}
