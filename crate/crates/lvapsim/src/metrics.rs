//! Trace capture and post-processing: constant-rate traffic schedules,
//! handoff gap estimation from the tx/rx packet traces, loss attribution
//! against transaction windows, summary statistics and report files.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::engine::{ms_to_us, SimTime};
use crate::types::MacAddr48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficSpec {
    pub packet_interval_ms: f64,
    pub payload_bytes: u32,
    pub duration_s: f64,
}

impl TrafficSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.packet_interval_ms > 0.0) {
            return Err("traffic.packet_interval_ms must be > 0".into());
        }
        if self.payload_bytes == 0 {
            return Err("traffic.payload_bytes must be > 0".into());
        }
        if !(self.duration_s >= 0.0) {
            return Err("traffic.duration_s must be >= 0".into());
        }
        Ok(())
    }

    /// Offer instants for the whole run. Packet `seq` is offered at
    /// `(seq + 1) * interval`, so the air is quiet at t = 0 and an
    /// `interval`-per-packet flow over `duration` yields
    /// `floor(duration / interval)` packets.
    pub fn offer_times(&self) -> Vec<SimTime> {
        let interval = ms_to_us(self.packet_interval_ms);
        let end = (self.duration_s * 1_000_000.0).round() as SimTime;
        let n = if interval == 0 { 0 } else { end / interval };
        (1..=n).map(|i| i * interval).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossCause {
    Handoff,
    Random,
}

impl LossCause {
    pub fn label(opt: Option<LossCause>) -> &'static str {
        match opt {
            None => "none",
            Some(LossCause::Handoff) => "handoff",
            Some(LossCause::Random) => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub seq: u64,
    pub tx_time_us: SimTime,
    pub rx_time_us: Option<SimTime>,
    pub size_bytes: u32,
    pub truth_cause: Option<LossCause>,
    pub est_cause: Option<LossCause>,
}

impl PacketRecord {
    pub fn lost(&self) -> bool {
        self.rx_time_us.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMode {
    /// Gap from the tx time of the last packet received before the loss run
    /// to the rx time of the first packet received after it.
    LastReceived,
    /// Gap from the tx time of the first lost packet instead.
    FirstLost,
}

impl GapMode {
    pub fn parse(s: &str) -> Option<GapMode> {
        match s {
            "last-received" => Some(GapMode::LastReceived),
            "first-lost" => Some(GapMode::FirstLost),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapOutcome {
    Detected { gap_us: u64, est_loss_count: u32 },
    /// No losses inside the window; the handoff left no trace footprint.
    Undetectable,
    /// The loss run never terminates in a received packet.
    OpenGap,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("estimation window starts at {cmd_time_us} us, beyond the last offered packet at {last_tx_us} us")]
    WindowBeyondTrace {
        cmd_time_us: SimTime,
        last_tx_us: SimTime,
    },
    #[error("empty trace")]
    EmptyTrace,
}

/// Default detection window: twice the countdown plus the profile's
/// worst-case idle span.
pub fn default_window_us(
    csa_count: u32,
    burst_us: SimTime,
    switch_latency_us: SimTime,
    beacons_required: u32,
    jitter_us: SimTime,
) -> SimTime {
    let countdown = u64::from(csa_count) * burst_us;
    let idle = switch_latency_us + u64::from(beacons_required + 1) * burst_us + jitter_us;
    2 * (countdown + idle)
}

/// Estimate the service gap a handoff carved into the packet trace.
///
/// Restricts attention to packets offered in `[cmd_time, cmd_time +
/// window]`, picks the longest run of consecutively lost packets (ties go
/// to the earliest run), then anchors the gap on the nearest received
/// packets on either side of that run in the full trace.
pub fn estimate_gap(
    records: &[PacketRecord],
    cmd_time: SimTime,
    window_us: SimTime,
    mode: GapMode,
) -> Result<GapOutcome, MetricsError> {
    let last = records.last().ok_or(MetricsError::EmptyTrace)?;
    if cmd_time > last.tx_time_us {
        return Err(MetricsError::WindowBeyondTrace {
            cmd_time_us: cmd_time,
            last_tx_us: last.tx_time_us,
        });
    }
    let end = cmd_time.saturating_add(window_us);
    let in_window: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.tx_time_us >= cmd_time && r.tx_time_us <= end)
        .map(|(i, _)| i)
        .collect();

    let mut best: Option<(usize, usize)> = None;
    let mut run_start: Option<usize> = None;
    let mut prev_idx: Option<usize> = None;
    for &i in &in_window {
        let contiguous = prev_idx.map_or(false, |p| p + 1 == i);
        if records[i].lost() {
            if run_start.is_none() || !contiguous {
                run_start = Some(i);
            }
        } else {
            run_start = None;
        }
        if let Some(s) = run_start {
            let len = i - s + 1;
            if best.map_or(true, |(bs, be)| len > be - bs + 1) {
                best = Some((s, i));
            }
        }
        prev_idx = Some(i);
    }
    let Some((mut s, mut e)) = best else {
        return Ok(GapOutcome::Undetectable);
    };
    // Extend across the window edges so the gap reflects the real run.
    while s > 0 && records[s - 1].lost() {
        s -= 1;
    }
    while e + 1 < records.len() && records[e + 1].lost() {
        e += 1;
    }
    let before = records[..s].iter().rev().find(|r| !r.lost());
    let after = records[e + 1..].iter().find(|r| !r.lost());
    let (Some(before), Some(after)) = (before, after) else {
        return Ok(GapOutcome::OpenGap);
    };
    let anchor = match mode {
        GapMode::LastReceived => before.tx_time_us,
        GapMode::FirstLost => records[s].tx_time_us,
    };
    let rx_after = after.rx_time_us.expect("received packet has rx time");
    Ok(GapOutcome::Detected {
        gap_us: rx_after.saturating_sub(anchor),
        est_loss_count: (e - s + 1) as u32,
    })
}

/// A transaction's attribution window endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxnWindow {
    pub txn_id: u64,
    pub cmd_time_us: SimTime,
    pub complete_time_us: SimTime,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AttributionReport {
    pub est_handoff: u64,
    pub est_random: u64,
    pub truth_handoff: u64,
    pub truth_random: u64,
    /// Lost packets whose estimated cause differs from the ground truth.
    pub divergent: u64,
    /// Ground-truth random losses that fell inside a handoff window; the
    /// upper bound on inevitable misattribution.
    pub random_inside_windows: u64,
}

/// Tag every lost packet Handoff when its offer time falls in any
/// `[cmd, complete + guard]` window, Random otherwise, and compare against
/// the ground truth.
pub fn attribute_losses(
    records: &mut [PacketRecord],
    windows: &[TxnWindow],
    guard_us: SimTime,
) -> AttributionReport {
    let mut report = AttributionReport::default();
    for r in records.iter_mut() {
        if !r.lost() {
            r.est_cause = None;
            continue;
        }
        let inside = windows.iter().any(|w| {
            r.tx_time_us >= w.cmd_time_us
                && r.tx_time_us <= w.complete_time_us.saturating_add(guard_us)
        });
        let est = if inside {
            LossCause::Handoff
        } else {
            LossCause::Random
        };
        r.est_cause = Some(est);
        match est {
            LossCause::Handoff => report.est_handoff += 1,
            LossCause::Random => report.est_random += 1,
        }
        match r.truth_cause {
            Some(LossCause::Handoff) => report.truth_handoff += 1,
            Some(LossCause::Random) => {
                report.truth_random += 1;
                if inside {
                    report.random_inside_windows += 1;
                }
            }
            None => unreachable!("lost packet without truth cause"),
        }
        if r.est_cause != r.truth_cause {
            report.divergent += 1;
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoffMeasurement {
    pub txn_id: u64,
    pub sta: MacAddr48,
    pub origin_ap: u32,
    pub dest_ap: Option<u32>,
    pub cmd_time_us: SimTime,
    pub retune_time_us: Option<SimTime>,
    pub resume_time_us: Option<SimTime>,
    pub outcome: GapOutcome,
}

impl HandoffMeasurement {
    pub fn detected(&self) -> bool {
        matches!(self.outcome, GapOutcome::Detected { .. })
    }

    pub fn gap_us(&self) -> Option<u64> {
        match self.outcome {
            GapOutcome::Detected { gap_us, .. } => Some(gap_us),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub burst_ms: f64,
    pub total_loss_pct: f64,
    pub handoff_loss_pct: f64,
    pub random_loss_pct: f64,
    pub p50_gap_ms: Option<f64>,
    pub p90_gap_ms: Option<f64>,
    pub max_gap_ms: Option<f64>,
    pub undetectable: u32,
}

/// Nearest-rank percentile of a sorted-or-not sample; p in (0, 100].
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("comparable gap values"));
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Fraction of gaps at or below a threshold; Table 2's accumulative column.
pub fn acc_below(gaps_ms: &[f64], threshold_ms: f64) -> f64 {
    if gaps_ms.is_empty() {
        return 0.0;
    }
    let n = gaps_ms.iter().filter(|g| **g <= threshold_ms).count();
    n as f64 / gaps_ms.len() as f64
}

pub fn summarize(
    records: &[PacketRecord],
    measurements: &[HandoffMeasurement],
    attribution: &AttributionReport,
    burst_ms: f64,
) -> SummaryRow {
    let offered = records.len() as f64;
    let lost = records.iter().filter(|r| r.lost()).count() as f64;
    let pct = |n: f64| if offered > 0.0 { 100.0 * n / offered } else { 0.0 };
    let gaps: Vec<f64> = measurements
        .iter()
        .filter_map(|m| m.gap_us().map(|g| g as f64 / 1_000.0))
        .collect();
    SummaryRow {
        burst_ms,
        total_loss_pct: pct(lost),
        handoff_loss_pct: pct(attribution.est_handoff as f64),
        random_loss_pct: pct(attribution.est_random as f64),
        p50_gap_ms: percentile(&gaps, 50.0),
        p90_gap_ms: percentile(&gaps, 90.0),
        max_gap_ms: gaps
            .iter()
            .copied()
            .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.max(g)))),
        undetectable: measurements.iter().filter(|m| !m.detected()).count() as u32,
    }
}

/// One line of events.log: `<time_us> <target> <kind> <details>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub time_us: SimTime,
    pub target: String,
    pub kind: String,
    pub details: String,
}

impl std::fmt::Display for EventRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.time_us, self.target, self.kind, self.details
        )
    }
}

fn opt_num<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_fixed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

pub fn render_packets_csv(records: &[PacketRecord]) -> String {
    let mut out = String::from("seq,tx_time_us,rx_time_us,lost,truth_cause,est_cause\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seq,
            r.tx_time_us,
            opt_num(r.rx_time_us),
            u8::from(r.lost()),
            LossCause::label(r.truth_cause),
            LossCause::label(r.est_cause),
        );
    }
    out
}

pub fn render_handoffs_csv(measurements: &[HandoffMeasurement]) -> String {
    let mut out = String::from(
        "txn_id,sta,origin_ap,dest_ap,cmd_time_us,retune_time_us,resume_time_us,gap_us,detected\n",
    );
    for m in measurements {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            m.txn_id,
            m.sta,
            m.origin_ap,
            opt_num(m.dest_ap),
            m.cmd_time_us,
            opt_num(m.retune_time_us),
            opt_num(m.resume_time_us),
            opt_num(m.gap_us()),
            u8::from(m.detected()),
        );
    }
    out
}

pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "burst_ms,total_loss_pct,handoff_loss_pct,random_loss_pct,p50_gap_ms,p90_gap_ms,max_gap_ms,undetectable\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:.2},{:.2},{:.2},{:.2},{},{},{},{}",
            r.burst_ms,
            r.total_loss_pct,
            r.handoff_loss_pct,
            r.random_loss_pct,
            opt_fixed(r.p50_gap_ms),
            opt_fixed(r.p90_gap_ms),
            opt_fixed(r.max_gap_ms),
            r.undetectable,
        );
    }
    out
}

pub fn render_events_log(events: &[EventRecord]) -> String {
    let mut out = String::new();
    for e in events {
        let _ = writeln!(out, "{e}");
    }
    out
}

/// Everything one run produces, ready for serialization.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub records: Vec<PacketRecord>,
    pub measurements: Vec<HandoffMeasurement>,
    pub summary: Vec<SummaryRow>,
    pub events: Vec<EventRecord>,
}

pub fn emit_reports(out_dir: &Path, report: &RunReport) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("packets.csv"), render_packets_csv(&report.records))?;
    std::fs::write(
        out_dir.join("handoffs.csv"),
        render_handoffs_csv(&report.measurements),
    )?;
    std::fs::write(out_dir.join("summary.csv"), render_summary_csv(&report.summary))?;
    std::fs::write(out_dir.join("events.log"), render_events_log(&report.events))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(lost_seqs: &[u64], n: u64, latency_us: u64) -> Vec<PacketRecord> {
        (0..n)
            .map(|seq| {
                let tx = seq * 10_000;
                let lost = lost_seqs.contains(&seq);
                PacketRecord {
                    seq,
                    tx_time_us: tx,
                    rx_time_us: (!lost).then_some(tx + latency_us),
                    size_bytes: 80,
                    truth_cause: lost.then_some(LossCause::Handoff),
                    est_cause: None,
                }
            })
            .collect()
    }

    #[test]
    fn traffic_counts() {
        let spec = TrafficSpec {
            packet_interval_ms: 10.0,
            payload_bytes: 80,
            duration_s: 1.0,
        };
        let times = spec.offer_times();
        assert_eq!(times.len(), 100);
        assert_eq!(times[0], 10_000);
        assert_eq!(*times.last().unwrap(), 1_000_000);

        let long = TrafficSpec {
            duration_s: 600.0,
            ..spec
        };
        assert_eq!(long.offer_times().len(), 60_000);
    }

    #[test]
    fn payload_size_is_constant() {
        let t = trace(&[], 50, 0);
        assert!(t.iter().all(|r| r.size_bytes == 80));
    }

    #[test]
    fn gap_example_from_hand_built_trace() {
        // tx every 10 ms, seqs 10..=15 lost, 2 ms delivery latency:
        // last pre-gap packet tx=90 rx=92, first post-gap rx=162.
        let t = trace(&[10, 11, 12, 13, 14, 15], 20, 2_000);
        let got = estimate_gap(&t, 80_000, 200_000, GapMode::LastReceived).unwrap();
        assert_eq!(
            got,
            GapOutcome::Detected {
                gap_us: 72_000,
                est_loss_count: 6
            }
        );
        let alt = estimate_gap(&t, 80_000, 200_000, GapMode::FirstLost).unwrap();
        assert_eq!(
            alt,
            GapOutcome::Detected {
                gap_us: 62_000,
                est_loss_count: 6
            }
        );
    }

    #[test]
    fn no_losses_in_window_is_undetectable() {
        let t = trace(&[2], 30, 0);
        let got = estimate_gap(&t, 100_000, 50_000, GapMode::LastReceived).unwrap();
        assert_eq!(got, GapOutcome::Undetectable);
    }

    #[test]
    fn all_lost_in_window_is_open_gap() {
        let mut t = trace(&[], 10, 0);
        for r in t.iter_mut().skip(5) {
            r.rx_time_us = None;
            r.truth_cause = Some(LossCause::Handoff);
        }
        let got = estimate_gap(&t, 50_000, 100_000, GapMode::LastReceived).unwrap();
        assert_eq!(got, GapOutcome::OpenGap);
    }

    #[test]
    fn window_beyond_trace_errors() {
        let t = trace(&[], 10, 0);
        let err = estimate_gap(&t, 500_000, 10_000, GapMode::LastReceived).unwrap_err();
        assert_eq!(
            err,
            MetricsError::WindowBeyondTrace {
                cmd_time_us: 500_000,
                last_tx_us: 90_000
            }
        );
        // cmd exactly at the last offer is still inside the trace.
        assert!(estimate_gap(&t, 90_000, 10_000, GapMode::LastReceived).is_ok());
    }

    #[test]
    fn tied_runs_pick_the_earliest() {
        let t = trace(&[3, 4, 8, 9], 15, 0);
        let got = estimate_gap(&t, 0, 140_000, GapMode::FirstLost).unwrap();
        // Both runs have length 2; the gap anchors on seq 3.
        assert_eq!(
            got,
            GapOutcome::Detected {
                gap_us: 50_000 - 30_000,
                est_loss_count: 2
            }
        );
    }

    #[test]
    fn run_extends_past_window_edges() {
        let t = trace(&[5, 6, 7, 8], 20, 0);
        // Window only covers seqs 6..=7, but the run is 5..=8.
        let got = estimate_gap(&t, 60_000, 10_000, GapMode::LastReceived).unwrap();
        assert_eq!(
            got,
            GapOutcome::Detected {
                gap_us: 90_000 - 40_000,
                est_loss_count: 4
            }
        );
    }

    #[test]
    fn attribution_matches_truth_without_random_loss() {
        let mut t = trace(&[10, 11, 12], 30, 0);
        let windows = [TxnWindow {
            txn_id: 1,
            cmd_time_us: 95_000,
            complete_time_us: 130_000,
        }];
        let report = attribute_losses(&mut t, &windows, 0);
        assert_eq!(report.est_handoff, 3);
        assert_eq!(report.est_random, 0);
        assert_eq!(report.divergent, 0);
        assert_eq!(t[10].est_cause, Some(LossCause::Handoff));
    }

    #[test]
    fn loss_far_from_any_window_is_random() {
        let mut t = trace(&[], 30, 0);
        t[25].rx_time_us = None;
        t[25].truth_cause = Some(LossCause::Random);
        let windows = [TxnWindow {
            txn_id: 1,
            cmd_time_us: 10_000,
            complete_time_us: 40_000,
        }];
        let report = attribute_losses(&mut t, &windows, 0);
        assert_eq!(report.est_random, 1);
        assert_eq!(report.divergent, 0);
    }

    #[test]
    fn random_loss_inside_window_diverges_and_is_bounded() {
        let mut t = trace(&[10], 30, 0);
        t[11].rx_time_us = None;
        t[11].truth_cause = Some(LossCause::Random);
        let windows = [TxnWindow {
            txn_id: 1,
            cmd_time_us: 95_000,
            complete_time_us: 130_000,
        }];
        let report = attribute_losses(&mut t, &windows, 0);
        assert_eq!(report.est_handoff, 2);
        assert_eq!(report.divergent, 1);
        assert_eq!(report.random_inside_windows, 1);
        assert!(report.divergent <= report.random_inside_windows);
    }

    #[test]
    fn guard_extends_the_window() {
        let mut t = trace(&[], 30, 0);
        t[15].rx_time_us = None;
        t[15].truth_cause = Some(LossCause::Handoff);
        let windows = [TxnWindow {
            txn_id: 1,
            cmd_time_us: 100_000,
            complete_time_us: 140_000,
        }];
        let without = attribute_losses(&mut t.clone(), &windows, 0);
        assert_eq!(without.est_random, 1);
        let with = attribute_losses(&mut t, &windows, 20_000);
        assert_eq!(with.est_handoff, 1);
    }

    #[test]
    fn conservation_holds() {
        let mut t = trace(&[3, 4, 17], 40, 0);
        t[25].rx_time_us = None;
        t[25].truth_cause = Some(LossCause::Random);
        let windows = [TxnWindow {
            txn_id: 1,
            cmd_time_us: 25_000,
            complete_time_us: 60_000,
        }];
        let report = attribute_losses(&mut t, &windows, 0);
        let received = t.iter().filter(|r| !r.lost()).count() as u64;
        let lost = t.iter().filter(|r| r.lost()).count() as u64;
        assert_eq!(received + lost, 40);
        assert_eq!(report.truth_handoff + report.truth_random, lost);
        assert_eq!(report.est_handoff + report.est_random, lost);
    }

    #[test]
    fn summary_percentages() {
        let mut records = trace(&[], 60_000, 0);
        for r in records.iter_mut().take(198) {
            r.rx_time_us = None;
            r.truth_cause = Some(LossCause::Random);
        }
        let attribution = AttributionReport {
            est_handoff: 186,
            est_random: 12,
            ..Default::default()
        };
        let row = summarize(&records, &[], &attribution, 10.0);
        assert_eq!(format!("{:.2}", row.total_loss_pct), "0.33");
        assert_eq!(format!("{:.2}", row.handoff_loss_pct), "0.31");
        assert_eq!(format!("{:.2}", row.random_loss_pct), "0.02");
    }

    #[test]
    fn accumulative_fraction_matches_table_semantics() {
        let mut gaps: Vec<f64> = (0..18).map(|i| 40.0 + i as f64).collect();
        gaps.push(90.0);
        gaps.push(120.0);
        assert_eq!(gaps.len(), 20);
        assert!((acc_below(&gaps, 73.8) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn percentiles_use_nearest_rank() {
        let vals: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert_eq!(percentile(&vals, 50.0), Some(5.0));
        assert_eq!(percentile(&vals, 90.0), Some(9.0));
        assert_eq!(percentile(&vals, 100.0), Some(10.0));
        assert_eq!(percentile(&[], 50.0), None);
    }

    #[test]
    fn zero_loss_summary_is_all_zero() {
        let records = trace(&[], 1_000, 0);
        let measurements: Vec<HandoffMeasurement> = (1..=20)
            .map(|i| HandoffMeasurement {
                txn_id: i,
                sta: "00:1b:b1:00:00:01".parse().unwrap(),
                origin_ap: 1,
                dest_ap: Some(2),
                cmd_time_us: i * 1_000_000,
                retune_time_us: None,
                resume_time_us: None,
                outcome: GapOutcome::Undetectable,
            })
            .collect();
        let row = summarize(&records, &measurements, &AttributionReport::default(), 5.0);
        assert_eq!(row.total_loss_pct, 0.0);
        assert_eq!(row.handoff_loss_pct, 0.0);
        assert_eq!(row.undetectable, 20);
        assert_eq!(row.p50_gap_ms, None);
    }

    #[test]
    fn csv_shapes() {
        let mut records = trace(&[1], 3, 2_000);
        attribute_losses(
            &mut records,
            &[TxnWindow {
                txn_id: 1,
                cmd_time_us: 5_000,
                complete_time_us: 20_000,
            }],
            0,
        );
        let packets = render_packets_csv(&records);
        let lines: Vec<&str> = packets.lines().collect();
        assert_eq!(lines[0], "seq,tx_time_us,rx_time_us,lost,truth_cause,est_cause");
        assert_eq!(lines[1], "0,0,2000,0,none,none");
        assert_eq!(lines[2], "1,10000,,1,handoff,handoff");

        let m = HandoffMeasurement {
            txn_id: 1,
            sta: "00:1b:b1:00:00:01".parse().unwrap(),
            origin_ap: 1,
            dest_ap: Some(2),
            cmd_time_us: 5_000,
            retune_time_us: Some(9_000),
            resume_time_us: Some(19_000),
            outcome: GapOutcome::Detected {
                gap_us: 12_000,
                est_loss_count: 1,
            },
        };
        let handoffs = render_handoffs_csv(&[m.clone()]);
        assert_eq!(
            handoffs.lines().nth(1).unwrap(),
            "1,00:1b:b1:00:00:01,1,2,5000,9000,19000,12000,1"
        );
        let undet = HandoffMeasurement {
            outcome: GapOutcome::Undetectable,
            retune_time_us: None,
            resume_time_us: None,
            ..m
        };
        assert_eq!(
            render_handoffs_csv(&[undet]).lines().nth(1).unwrap(),
            "1,00:1b:b1:00:00:01,1,2,5000,,,,0"
        );

        let row = SummaryRow {
            burst_ms: 10.0,
            total_loss_pct: 0.33,
            handoff_loss_pct: 0.31,
            random_loss_pct: 0.02,
            p50_gap_ms: Some(71.5),
            p90_gap_ms: Some(73.8),
            max_gap_ms: Some(90.0),
            undetectable: 1,
        };
        assert_eq!(
            render_summary_csv(&[row]).lines().nth(1).unwrap(),
            "10.00,0.33,0.31,0.02,71.50,73.80,90.00,1"
        );
    }

    #[test]
    fn empty_run_renders_headers_only() {
        assert_eq!(render_packets_csv(&[]).lines().count(), 1);
        assert_eq!(render_handoffs_csv(&[]).lines().count(), 1);
        assert_eq!(render_summary_csv(&[]).lines().count(), 1);
        assert_eq!(render_events_log(&[]), "");
    }

    #[test]
    fn reports_are_byte_identical_across_calls() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let mut report = RunReport::default();
        report.records = trace(&[5], 12, 1_000);
        report.events.push(EventRecord {
            time_us: 50_000,
            target: "sta0".into(),
            kind: "pkt_drop".into(),
            details: "seq=5 cause=handoff".into(),
        });
        emit_reports(&a, &report).unwrap();
        emit_reports(&b, &report).unwrap();
        for f in ["packets.csv", "handoffs.csv", "summary.csv", "events.log"] {
            assert_eq!(
                std::fs::read(a.join(f)).unwrap(),
                std::fs::read(b.join(f)).unwrap(),
                "{f}"
            );
        }
        assert_eq!(
            std::fs::read_to_string(a.join("events.log")).unwrap(),
            "50000 sta0 pkt_drop seq=5 cause=handoff\n"
        );
    }

    #[test]
    fn default_window_covers_countdown_and_idle() {
        // count 4, b = 10 ms, L = 50 ms, K = 3: 2*(40 + 50 + 40) = 260 ms.
        assert_eq!(default_window_us(4, 10_000, 50_000, 3, 0), 260_000);
    }

    #[test]
    fn sorted_run_report_event_lines() {
        let e = EventRecord {
            time_us: 30_041_000,
            target: "sta0".into(),
            kind: "retune_start".into(),
            details: "ch=9".into(),
        };
        assert_eq!(e.to_string(), "30041000 sta0 retune_start ch=9");
    }
}
