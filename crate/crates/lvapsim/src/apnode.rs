//! AP agent model. Hosts LVAP slots, runs the dual-rate unicast beacon
//! scheduler with CSA countdowns, performs auxiliary-interface scans and
//! publishes threshold events to the controller.
//!
//! The node is a pure state machine: callers (the simulation world or unit
//! tests) invoke its methods and act on the returned directives. It never
//! touches the kernel or the medium itself.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{ms_to_us, SimTime};
use crate::medium::beacon_airtime_us;
use crate::protocol::{ControlMessage, Relation, StaFilter};
use crate::types::{AuxState, BeaconPolicy, ChannelId, Lvap, MacAddr48};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeaconMode {
    Normal,
    /// The next `remaining` beacons are spaced `interval_us` apart; the mode
    /// reverts to Normal when the count runs out.
    Burst { interval_us: SimTime, remaining: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsaCountdown {
    pub new_channel: ChannelId,
    pub count_remaining: u32,
}

#[derive(Debug, Clone)]
pub struct LvapSlot {
    pub lvap: Lvap,
    pub beacon_mode: BeaconMode,
    pub csa: Option<CsaCountdown>,
    /// Set once the STA has acknowledged a beacon from this AP; bootstrap
    /// slots start confirmed, handoff ADDs start unconfirmed.
    pub confirmed: bool,
    /// Bumped on every (re-)add so stale beacon events can be ignored.
    pub epoch: u64,
}

/// A unicast beacon as it leaves the AP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaconFrame {
    pub ap_id: u32,
    pub bssid: MacAddr48,
    pub dst: MacAddr48,
    pub channel: ChannelId,
    /// Current beacon spacing, carried so the STA can predict the switch
    /// instant from any countdown beacon it happens to hear.
    pub interval_us: SimTime,
    pub csa: Option<(ChannelId, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeaconEmission {
    pub frame: BeaconFrame,
    pub next_in: SimTime,
    pub airtime_us: u64,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq)]
struct Subscription {
    sub_id: u64,
    sta_filter: StaFilter,
    metric: String,
    relation: Relation,
    threshold: f64,
    last_fired: BTreeMap<MacAddr48, SimTime>,
}

#[derive(Debug, Clone)]
struct ActiveScan {
    req_id: u64,
    channel: ChannelId,
    sta_mac: MacAddr48,
    until: SimTime,
    samples: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApNodeError {
    #[error("lvap for {0} already hosted")]
    DuplicateLvap(MacAddr48),
    #[error("no lvap for {0}")]
    UnknownLvap(MacAddr48),
    #[error("csa countdown already active for {0}")]
    CsaInProgress(MacAddr48),
    #[error("auxiliary interface busy until {0}")]
    AuxBusy(SimTime),
}

#[derive(Debug)]
pub struct ApNode {
    pub ap_id: u32,
    pub channel: ChannelId,
    pub policy: BeaconPolicy,
    pub beacon_size_bytes: u32,
    pub beacon_rate_mbps: f64,
    pub rssi_alpha: f64,
    pub sub_cooldown_ms: f64,
    slots: BTreeMap<MacAddr48, LvapSlot>,
    subscriptions: BTreeMap<u64, Subscription>,
    smoothed: BTreeMap<MacAddr48, f64>,
    scan: Option<ActiveScan>,
    beacon_times: Vec<(SimTime, u64)>,
    epoch_counter: u64,
}

impl ApNode {
    pub fn new(ap_id: u32, channel: ChannelId, policy: BeaconPolicy) -> Self {
        ApNode {
            ap_id,
            channel,
            policy,
            beacon_size_bytes: 125,
            beacon_rate_mbps: 1.0,
            rssi_alpha: 0.5,
            sub_cooldown_ms: 2_000.0,
            slots: BTreeMap::new(),
            subscriptions: BTreeMap::new(),
            smoothed: BTreeMap::new(),
            scan: None,
            beacon_times: Vec::new(),
            epoch_counter: 0,
        }
    }

    pub fn slot(&self, sta: &MacAddr48) -> Option<&LvapSlot> {
        self.slots.get(sta)
    }

    pub fn hosts(&self, sta: &MacAddr48) -> bool {
        self.slots.contains_key(sta)
    }

    pub fn hosted_stas(&self) -> impl Iterator<Item = &MacAddr48> {
        self.slots.keys()
    }

    pub fn aux_state(&self) -> AuxState {
        match &self.scan {
            None => AuxState::Idle,
            Some(s) => AuxState::Scanning {
                channel: s.channel,
                until_us: s.until,
            },
        }
    }

    fn normal_interval_us(&self) -> SimTime {
        ms_to_us(self.policy.interval_normal_ms)
    }

    fn burst_mode(&self) -> BeaconMode {
        BeaconMode::Burst {
            interval_us: ms_to_us(self.policy.interval_burst_ms),
            remaining: self.policy.burst_count,
        }
    }

    /// Install a slot. The caller must schedule the first beacon at delay 0.
    /// `burst` selects Burst mode (handoff ADDs) versus Normal (bootstrap).
    pub fn add_lvap(&mut self, lvap: Lvap, burst: bool) -> Result<&LvapSlot, ApNodeError> {
        let sta = lvap.sta_mac;
        if self.slots.contains_key(&sta) {
            return Err(ApNodeError::DuplicateLvap(sta));
        }
        self.epoch_counter += 1;
        let mode = if burst {
            self.burst_mode()
        } else {
            BeaconMode::Normal
        };
        self.slots.insert(
            sta,
            LvapSlot {
                lvap,
                beacon_mode: mode,
                csa: None,
                confirmed: !burst,
                epoch: self.epoch_counter,
            },
        );
        Ok(&self.slots[&sta])
    }

    /// Delete a slot. The caller must cancel the pending beacon event; the
    /// returned epoch also invalidates any event that slips through.
    pub fn remove_lvap(&mut self, sta: &MacAddr48) -> Result<LvapSlot, ApNodeError> {
        self.slots
            .remove(sta)
            .ok_or(ApNodeError::UnknownLvap(*sta))
    }

    /// Attach a CSA countdown and move the slot to Burst spacing so the
    /// whole countdown finishes in count·burst_interval. The AP's own
    /// channel never changes. The caller must reschedule the slot's beacon
    /// to fire immediately.
    pub fn start_csa(
        &mut self,
        sta: &MacAddr48,
        new_channel: ChannelId,
        count: u32,
        burst_interval_us: SimTime,
    ) -> Result<(), ApNodeError> {
        let slot = self
            .slots
            .get_mut(sta)
            .ok_or(ApNodeError::UnknownLvap(*sta))?;
        if slot.csa.is_some() {
            return Err(ApNodeError::CsaInProgress(*sta));
        }
        assert!(count >= 1);
        slot.csa = Some(CsaCountdown {
            new_channel,
            count_remaining: count,
        });
        slot.beacon_mode = BeaconMode::Burst {
            interval_us: burst_interval_us,
            remaining: count,
        };
        Ok(())
    }

    /// Emit one beacon for `sta` and advance the slot's schedule. Returns
    /// None for stale events (slot gone or re-added since scheduling).
    pub fn emit_beacon(&mut self, sta: &MacAddr48, epoch: u64, now: SimTime) -> Option<BeaconEmission> {
        let normal_us = self.normal_interval_us();
        let slot = self.slots.get_mut(sta)?;
        if slot.epoch != epoch {
            return None;
        }
        let csa = slot.csa.map(|c| (c.new_channel, c.count_remaining));
        if let Some(c) = &mut slot.csa {
            if c.count_remaining == 0 {
                slot.csa = None;
            } else {
                c.count_remaining -= 1;
            }
        }
        let (interval, next_mode) = match slot.beacon_mode {
            BeaconMode::Normal => (normal_us, BeaconMode::Normal),
            BeaconMode::Burst {
                interval_us,
                remaining,
            } => {
                if remaining > 1 {
                    (
                        interval_us,
                        BeaconMode::Burst {
                            interval_us,
                            remaining: remaining - 1,
                        },
                    )
                } else {
                    (interval_us, BeaconMode::Normal)
                }
            }
        };
        slot.beacon_mode = next_mode;
        let bssid = slot.lvap.bssid;
        let airtime = beacon_airtime_us(self.beacon_size_bytes, self.beacon_rate_mbps);
        self.beacon_times.push((now, airtime));
        Some(BeaconEmission {
            frame: BeaconFrame {
                ap_id: self.ap_id,
                bssid,
                dst: *sta,
                channel: self.channel,
                interval_us: interval,
                csa,
            },
            next_in: interval,
            airtime_us: airtime,
            epoch,
        })
    }

    /// First confirmed beacon delivery for an unconfirmed slot returns true;
    /// the caller then reports completion to the controller.
    pub fn on_beacon_ack(&mut self, sta: &MacAddr48) -> bool {
        match self.slots.get_mut(sta) {
            Some(slot) if !slot.confirmed => {
                slot.confirmed = true;
                true
            }
            _ => false,
        }
    }

    /// Tune the auxiliary interface to `channel` for a scan. The caller
    /// must retune the aux radio and schedule `end_scan` at the returned
    /// instant.
    pub fn begin_scan(
        &mut self,
        req_id: u64,
        channel: ChannelId,
        sta_mac: MacAddr48,
        duration_ms: u32,
        now: SimTime,
    ) -> Result<SimTime, ApNodeError> {
        if let Some(s) = &self.scan {
            return Err(ApNodeError::AuxBusy(s.until));
        }
        let until = now + u64::from(duration_ms) * 1_000;
        self.scan = Some(ActiveScan {
            req_id,
            channel,
            sta_mac,
            until,
            samples: Vec::new(),
        });
        Ok(until)
    }

    /// Record a frame heard on the aux interface during a scan.
    pub fn record_scan_sample(&mut self, src: MacAddr48, rssi_dbm: f64) {
        if let Some(s) = &mut self.scan {
            if s.sta_mac == src {
                s.samples.push(rssi_dbm);
            }
        }
    }

    /// Close the scan window: aux returns to Idle; result is the mean RSSI
    /// over the window or None if the station was never heard.
    pub fn end_scan(&mut self) -> Option<(u64, Option<f64>)> {
        let s = self.scan.take()?;
        let rssi = if s.samples.is_empty() {
            None
        } else {
            Some(s.samples.iter().sum::<f64>() / s.samples.len() as f64)
        };
        Some((s.req_id, rssi))
    }

    pub fn install_subscription(
        &mut self,
        sub_id: u64,
        sta_filter: StaFilter,
        metric: String,
        relation: Relation,
        threshold: f64,
    ) {
        self.subscriptions.insert(
            sub_id,
            Subscription {
                sub_id,
                sta_filter,
                metric,
                relation,
                threshold,
                last_fired: BTreeMap::new(),
            },
        );
    }

    pub fn smoothed_rssi(&self, sta: &MacAddr48) -> Option<f64> {
        self.smoothed.get(sta).copied()
    }

    /// Feed one received uplink frame into the RSSI tracker and evaluate
    /// subscriptions. Returns PUBLISH messages to forward to the controller.
    pub fn observe_uplink(
        &mut self,
        sta: MacAddr48,
        rssi_dbm: f64,
        now: SimTime,
    ) -> Vec<ControlMessage> {
        if !self.slots.contains_key(&sta) {
            return Vec::new();
        }
        let sm = match self.smoothed.get(&sta) {
            Some(prev) => self.rssi_alpha * rssi_dbm + (1.0 - self.rssi_alpha) * prev,
            None => rssi_dbm,
        };
        self.smoothed.insert(sta, sm);
        let cooldown_us = ms_to_us(self.sub_cooldown_ms);
        let mut out = Vec::new();
        for sub in self.subscriptions.values_mut() {
            let matches_sta = match sub.sta_filter {
                StaFilter::Any => true,
                StaFilter::Mac(m) => m == sta,
            };
            if !matches_sta || sub.metric != "rssi" {
                continue;
            }
            let crossed = match sub.relation {
                Relation::Below => sm < sub.threshold,
                Relation::Above => sm > sub.threshold,
            };
            if !crossed {
                continue;
            }
            if let Some(last) = sub.last_fired.get(&sta) {
                if now - last < cooldown_us {
                    continue;
                }
            }
            sub.last_fired.insert(sta, now);
            out.push(ControlMessage::Publish {
                ap_id: self.ap_id,
                sta_mac: sta,
                metric: sub.metric.clone(),
                value: sm,
                at: now,
            });
        }
        out
    }

    /// Beacon count, rate and airtime fraction over [from, to).
    pub fn beacon_overhead(&self, from: SimTime, to: SimTime) -> (u32, f64, f64) {
        assert!(to > from, "empty accounting window");
        let mut count = 0u32;
        let mut airtime = 0u64;
        for (t, a) in &self.beacon_times {
            if *t >= from && *t < to {
                count += 1;
                airtime += a;
            }
        }
        let window_us = (to - from) as f64;
        (
            count,
            count as f64 * 1_000_000.0 / window_us,
            airtime as f64 / window_us,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Ipv4Addr;

    fn mac(s: &str) -> MacAddr48 {
        s.parse().unwrap()
    }

    fn ch(i: u16) -> ChannelId {
        ChannelId::new(i).unwrap()
    }

    fn lvap(n: u8) -> Lvap {
        Lvap::new(
            mac(&format!("00:1b:b1:00:00:{n:02x}")),
            mac(&format!("0a:00:00:00:00:{n:02x}")),
            Ipv4Addr::new(10, 0, 0, n),
            "office",
        )
        .unwrap()
    }

    fn ap() -> ApNode {
        ApNode::new(1, ch(4), BeaconPolicy::new(100.0, 10.0, 20).unwrap())
    }

    // Drives the beacon schedule the way the world does: emit, hop by
    // next_in, repeat. Returns (emission time, csa count) pairs.
    fn run_beacons(
        ap: &mut ApNode,
        sta: &MacAddr48,
        epoch: u64,
        start: SimTime,
        n: usize,
    ) -> Vec<(SimTime, Option<u32>)> {
        let mut out = Vec::new();
        let mut t = start;
        for _ in 0..n {
            let e = ap.emit_beacon(sta, epoch, t).unwrap();
            out.push((t, e.frame.csa.map(|(_, c)| c)));
            t += e.next_in;
        }
        out
    }

    #[test]
    fn add_lvap_duplicate_rejected() {
        let mut ap = ap();
        ap.add_lvap(lvap(1), false).unwrap();
        assert_eq!(
            ap.add_lvap(lvap(1), true).unwrap_err(),
            ApNodeError::DuplicateLvap(lvap(1).sta_mac)
        );
    }

    #[test]
    fn normal_mode_spacing() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        let epoch = ap.add_lvap(lvap(1), false).unwrap().epoch;
        let times: Vec<SimTime> = run_beacons(&mut ap, &sta, epoch, 5_000, 3)
            .iter()
            .map(|(t, _)| *t)
            .collect();
        assert_eq!(times, vec![5_000, 105_000, 205_000]);
    }

    #[test]
    fn burst_add_runs_burst_count_then_normal() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        let epoch = ap.add_lvap(lvap(1), true).unwrap().epoch;
        let beacons = run_beacons(&mut ap, &sta, epoch, 0, 23);
        // Immediate beacon, then burst_count gaps of 10 ms, then 100 ms.
        for (i, (t, _)) in beacons.iter().take(21).enumerate() {
            assert_eq!(*t, i as u64 * 10_000);
        }
        assert_eq!(beacons[21].0, 200_000 + 100_000);
        assert_eq!(beacons[22].0, 400_000);
    }

    #[test]
    fn burst_remaining_two_then_normal() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        let epoch = ap.add_lvap(lvap(1), false).unwrap().epoch;
        ap.slots.get_mut(&sta).unwrap().beacon_mode = BeaconMode::Burst {
            interval_us: 10_000,
            remaining: 2,
        };
        let times: Vec<SimTime> = run_beacons(&mut ap, &sta, epoch, 0, 4)
            .iter()
            .map(|(t, _)| *t)
            .collect();
        assert_eq!(times, vec![0, 10_000, 20_000, 120_000]);
    }

    #[test]
    fn remove_lvap_unknown_and_stale_epoch() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        assert_eq!(
            ap.remove_lvap(&sta).unwrap_err(),
            ApNodeError::UnknownLvap(sta)
        );
        let epoch1 = ap.add_lvap(lvap(1), false).unwrap().epoch;
        ap.remove_lvap(&sta).unwrap();
        assert!(ap.emit_beacon(&sta, epoch1, 0).is_none());
        let epoch2 = ap.add_lvap(lvap(1), false).unwrap().epoch;
        assert_ne!(epoch1, epoch2);
        assert!(ap.emit_beacon(&sta, epoch1, 0).is_none());
        assert!(ap.emit_beacon(&sta, epoch2, 0).is_some());
    }

    #[test]
    fn csa_counts_descend_to_zero_then_clear() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        let epoch = ap.add_lvap(lvap(1), false).unwrap().epoch;
        ap.start_csa(&sta, ch(9), 3, 10_000).unwrap();
        let counts: Vec<Option<u32>> = run_beacons(&mut ap, &sta, epoch, 0, 6)
            .iter()
            .map(|(_, c)| *c)
            .collect();
        assert_eq!(
            counts,
            vec![Some(3), Some(2), Some(1), Some(0), None, None]
        );
        assert_eq!(ap.channel, ch(4));
    }

    #[test]
    fn csa_countdown_duration_is_count_times_burst() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        let epoch = ap.add_lvap(lvap(1), false).unwrap().epoch;
        ap.start_csa(&sta, ch(9), 4, 10_000).unwrap();
        let beacons = run_beacons(&mut ap, &sta, epoch, 50_000, 5);
        assert_eq!(beacons[0], (50_000, Some(4)));
        assert_eq!(beacons[4], (90_000, Some(0)));
    }

    #[test]
    fn csa_in_progress_rejected() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        ap.add_lvap(lvap(1), false).unwrap();
        ap.start_csa(&sta, ch(9), 4, 10_000).unwrap();
        assert_eq!(
            ap.start_csa(&sta, ch(9), 4, 10_000).unwrap_err(),
            ApNodeError::CsaInProgress(sta)
        );
        assert_eq!(
            ap.start_csa(&mac("00:1b:b1:00:00:09"), ch(9), 4, 10_000)
                .unwrap_err(),
            ApNodeError::UnknownLvap(mac("00:1b:b1:00:00:09"))
        );
    }

    #[test]
    fn count_one_emits_one_then_zero() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        let epoch = ap.add_lvap(lvap(1), false).unwrap().epoch;
        ap.start_csa(&sta, ch(9), 1, 5_000).unwrap();
        let counts: Vec<Option<u32>> = run_beacons(&mut ap, &sta, epoch, 0, 3)
            .iter()
            .map(|(_, c)| *c)
            .collect();
        assert_eq!(counts, vec![Some(1), Some(0), None]);
    }

    #[test]
    fn beacons_are_unicast_to_the_hosted_sta() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        let epoch = ap.add_lvap(lvap(1), false).unwrap().epoch;
        let e = ap.emit_beacon(&sta, epoch, 0).unwrap();
        assert_eq!(e.frame.dst, sta);
        assert_eq!(e.frame.bssid, lvap(1).bssid);
        assert_ne!(e.frame.dst, MacAddr48::BROADCAST);
    }

    #[test]
    fn scan_lifecycle_and_busy() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        let until = ap.begin_scan(7, ch(9), sta, 40, 1_000).unwrap();
        assert_eq!(until, 41_000);
        assert_eq!(
            ap.aux_state(),
            AuxState::Scanning {
                channel: ch(9),
                until_us: 41_000
            }
        );
        assert_eq!(
            ap.begin_scan(8, ch(9), sta, 40, 2_000).unwrap_err(),
            ApNodeError::AuxBusy(41_000)
        );
        ap.record_scan_sample(sta, -50.0);
        ap.record_scan_sample(mac("00:1b:b1:00:00:09"), -30.0);
        ap.record_scan_sample(sta, -52.0);
        assert_eq!(ap.end_scan(), Some((7, Some(-51.0))));
        assert_eq!(ap.aux_state(), AuxState::Idle);
    }

    #[test]
    fn scan_with_no_samples_reports_none() {
        let mut ap = ap();
        ap.begin_scan(9, ch(9), lvap(1).sta_mac, 40, 0).unwrap();
        assert_eq!(ap.end_scan(), Some((9, None)));
    }

    #[test]
    fn observe_uplink_threshold_and_cooldown() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        ap.add_lvap(lvap(1), false).unwrap();
        ap.install_subscription(1, StaFilter::Any, "rssi".into(), Relation::Below, -70.0);

        assert!(ap.observe_uplink(sta, -60.0, 1_000).is_empty());
        // Smoothed value: 0.5*(-90) + 0.5*(-60) = -75 < -70.
        let out = ap.observe_uplink(sta, -90.0, 2_000);
        assert_eq!(out.len(), 1);
        match &out[0] {
            ControlMessage::Publish {
                ap_id,
                sta_mac,
                metric,
                value,
                at,
            } => {
                assert_eq!(*ap_id, 1);
                assert_eq!(*sta_mac, sta);
                assert_eq!(metric, "rssi");
                assert_eq!(*value, -75.0);
                assert_eq!(*at, 2_000);
            }
            other => panic!("unexpected {other:?}"),
        }
        // Still below threshold but inside the 2 s cooldown.
        assert!(ap.observe_uplink(sta, -90.0, 500_000).is_empty());
        // Past the cooldown it fires again.
        assert_eq!(ap.observe_uplink(sta, -90.0, 2_002_000).len(), 1);
    }

    #[test]
    fn observe_uplink_ignores_unhosted_sta() {
        let mut ap = ap();
        ap.install_subscription(1, StaFilter::Any, "rssi".into(), Relation::Below, -70.0);
        assert!(ap
            .observe_uplink(mac("00:1b:b1:00:00:09"), -90.0, 1_000)
            .is_empty());
    }

    #[test]
    fn beacon_ack_confirms_once() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        ap.add_lvap(lvap(1), true).unwrap();
        assert!(ap.on_beacon_ack(&sta));
        assert!(!ap.on_beacon_ack(&sta));
        // Bootstrap slots start confirmed.
        let mut ap2 = self::ap();
        ap2.add_lvap(lvap(2), false).unwrap();
        assert!(!ap2.on_beacon_ack(&lvap(2).sta_mac));
    }

    #[test]
    fn overhead_normal_rate() {
        let mut ap = ap();
        let sta = lvap(1).sta_mac;
        let epoch = ap.add_lvap(lvap(1), false).unwrap().epoch;
        run_beacons(&mut ap, &sta, epoch, 0, 10);
        let (count, per_sec, airtime) = ap.beacon_overhead(0, 1_000_000);
        assert_eq!(count, 10);
        assert_eq!(per_sec, 10.0);
        assert_eq!(airtime, 10.0 * 1_000.0 / 1_000_000.0);
    }

    #[test]
    fn overhead_scales_with_lvap_count() {
        let mut ap = ap();
        for n in 1..=5 {
            let sta = lvap(n).sta_mac;
            let epoch = ap.add_lvap(lvap(n), false).unwrap().epoch;
            run_beacons(&mut ap, &sta, epoch, 0, 10);
        }
        let (count, per_sec, _) = ap.beacon_overhead(0, 1_000_000);
        assert_eq!(count, 50);
        assert_eq!(per_sec, 50.0);
    }

    #[test]
    fn overhead_during_burst() {
        let mut ap = ApNode::new(1, ch(4), BeaconPolicy::new(100.0, 5.0, 40).unwrap());
        let sta = lvap(1).sta_mac;
        let epoch = ap.add_lvap(lvap(1), true).unwrap().epoch;
        run_beacons(&mut ap, &sta, epoch, 0, 41);
        let (count, per_sec, _) = ap.beacon_overhead(0, 200_000);
        assert_eq!(count, 40);
        assert_eq!(per_sec, 200.0);
    }
}
