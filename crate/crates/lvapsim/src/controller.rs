//! Central WLAN controller. Owns the AP map and the per-station hosting
//! table, installs subscriptions, orchestrates neighbor scans, runs the
//! decision policy and drives the SEND_CSA / ADD_LVAP / REMOVE_LVAP
//! transaction whose timing the rest of the artifact measures.
//!
//! Like the node models, the controller is a pure state machine returning
//! effect directives; the simulation world performs the wiring, event
//! scheduling and logging.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::engine::{ms_to_us, SimTime};
use crate::protocol::{ControlMessage, Relation, StaFilter};
use crate::types::{ChannelId, Lvap, MacAddr48, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    ScanRequested,
    Deciding,
    CsaCountdown,
    Switching,
    Complete,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    NoCandidates,
    NoBetterAp,
    AgentError,
    Stale,
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AbortReason::NoCandidates => "no_candidates",
            AbortReason::NoBetterAp => "no_better_ap",
            AbortReason::AgentError => "agent_error",
            AbortReason::Stale => "stale",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct HandoffTransaction {
    pub txn_id: u64,
    pub sta_mac: MacAddr48,
    pub origin_ap: u32,
    pub dest_ap: Option<u32>,
    pub target_channel: Option<ChannelId>,
    pub csa_count: u32,
    pub phase: Phase,
    pub abort_reason: Option<AbortReason>,
    pub created_at: SimTime,
    pub deciding_at: Option<SimTime>,
    /// SEND_CSA emission time; the handoff command instant.
    pub cmd_time: Option<SimTime>,
    pub switching_at: Option<SimTime>,
    pub complete_at: Option<SimTime>,
    pub aborted_at: Option<SimTime>,
    origin_value: Option<f64>,
    polled: BTreeSet<u32>,
    responses: BTreeMap<u32, Option<f64>>,
}

impl HandoffTransaction {
    /// How many APs this transaction's scan fan-out polled.
    pub fn polled_count(&self) -> usize {
        self.polled.len()
    }

    fn advance(&mut self, phase: Phase, now: SimTime) {
        assert!(
            self.phase < phase && self.phase != Phase::Aborted,
            "txn {} phase {:?} -> {:?}",
            self.txn_id,
            self.phase,
            phase
        );
        self.phase = phase;
        match phase {
            Phase::Deciding => self.deciding_at = Some(now),
            Phase::CsaCountdown => self.cmd_time = Some(now),
            Phase::Switching => self.switching_at = Some(now),
            Phase::Complete => self.complete_at = Some(now),
            Phase::Aborted => self.aborted_at = Some(now),
            Phase::ScanRequested => {}
        }
    }
}

/// Handoff decision policies. MaxRssiHysteresis drives reactive handoffs
/// from subscriptions; ForcedAlternate ping-pongs each station between two
/// APs on a fixed period, the setup used for controlled measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionPolicy {
    MaxRssiHysteresis { margin_db: f64 },
    ForcedAlternate { period_s: f64 },
}

/// Pick the strongest responder that beats the origin's last smoothed RSSI
/// by the hysteresis margin. Ties go to the lowest AP id; silent APs are
/// never candidates.
pub fn decide(
    responses: &BTreeMap<u32, Option<f64>>,
    origin_value: f64,
    margin_db: f64,
) -> Option<u32> {
    let mut best: Option<(u32, f64)> = None;
    for (ap, rssi) in responses {
        let Some(rssi) = rssi else { continue };
        match best {
            Some((_, b)) if *rssi <= b => {}
            _ => best = Some((*ap, *rssi)),
        }
    }
    match best {
        Some((ap, rssi)) if rssi >= origin_value + margin_db => Some(ap),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SendKind {
    Subscribe,
    Scan { ap_id: u32 },
    Csa,
    Add,
    Remove,
}

/// Identifies a scheduled (not yet sent) controller message so an abort can
/// cancel it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScheduledTag {
    pub txn_id: u64,
    pub kind: SendKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CtrlEffect {
    /// Put a message on the wire now. `track` ties the wire sequence number
    /// back to a transaction for ACK/ERROR correlation.
    Send {
        to_ap: u32,
        msg: ControlMessage,
        track: Option<(u64, SendKind)>,
    },
    /// Put a message on the wire at a future instant.
    ScheduleSend {
        at: SimTime,
        to_ap: u32,
        msg: ControlMessage,
        track: Option<(u64, SendKind)>,
        tag: ScheduledTag,
    },
    CancelSend {
        tag: ScheduledTag,
    },
    ArmDecisionTimer {
        at: SimTime,
        txn_id: u64,
    },
    /// Free-form note for the event log.
    Log {
        kind: &'static str,
        details: String,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CtrlError {
    #[error("station {0} is not hosted anywhere")]
    UnknownStation(MacAddr48),
    #[error("forced handoffs need at least two APs")]
    NotEnoughAps,
}

#[derive(Debug, Clone)]
pub struct CtrlConfig {
    pub neighbor_radius_m: f64,
    pub scan_duration_ms: u32,
    pub decision_slack_ms: f64,
    pub csa_count: u32,
    pub burst_interval_ms: u32,
    pub remove_delay_ms: f64,
    /// Offset added to the predicted switch-completion instant before
    /// scheduling ADD_LVAP. Zero reproduces the open-loop scheme; negative
    /// values inject ordering violations on purpose.
    pub add_margin_ms: f64,
    pub publish_threshold_dbm: f64,
    pub policy: DecisionPolicy,
}

impl Default for CtrlConfig {
    fn default() -> Self {
        CtrlConfig {
            neighbor_radius_m: 100.0,
            scan_duration_ms: 40,
            decision_slack_ms: 20.0,
            csa_count: 4,
            burst_interval_ms: 10,
            remove_delay_ms: 50.0,
            add_margin_ms: 0.0,
            publish_threshold_dbm: -70.0,
            policy: DecisionPolicy::MaxRssiHysteresis { margin_db: 6.0 },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ApInfo {
    position: Position,
    channel: ChannelId,
}

#[derive(Debug)]
pub struct Controller {
    pub cfg: CtrlConfig,
    aps: BTreeMap<u32, ApInfo>,
    stations: BTreeMap<MacAddr48, Lvap>,
    hosting: BTreeMap<MacAddr48, u32>,
    txns: Vec<HandoffTransaction>,
    active_by_sta: BTreeMap<MacAddr48, u64>,
    outstanding: BTreeMap<u64, (u64, SendKind)>,
    sent_counts: BTreeMap<u64, u32>,
}

impl Controller {
    pub fn new(cfg: CtrlConfig) -> Self {
        Controller {
            cfg,
            aps: BTreeMap::new(),
            stations: BTreeMap::new(),
            hosting: BTreeMap::new(),
            txns: Vec::new(),
            active_by_sta: BTreeMap::new(),
            outstanding: BTreeMap::new(),
            sent_counts: BTreeMap::new(),
        }
    }

    pub fn register_ap(&mut self, ap_id: u32, position: Position, channel: ChannelId) {
        let dup = self.aps.insert(ap_id, ApInfo { position, channel });
        assert!(dup.is_none(), "duplicate ap id {ap_id}");
    }

    pub fn register_station(&mut self, lvap: Lvap, hosting_ap: u32) {
        assert!(self.aps.contains_key(&hosting_ap));
        self.hosting.insert(lvap.sta_mac, hosting_ap);
        self.stations.insert(lvap.sta_mac, lvap);
    }

    pub fn hosting_ap(&self, sta: &MacAddr48) -> Option<u32> {
        self.hosting.get(sta).copied()
    }

    pub fn txns(&self) -> &[HandoffTransaction] {
        &self.txns
    }

    pub fn active_txn_id(&self, sta: &MacAddr48) -> Option<u64> {
        self.active_by_sta.get(sta).copied()
    }

    /// Messages actually put on the wire for a transaction.
    pub fn sent_count(&self, txn_id: u64) -> u32 {
        self.sent_counts.get(&txn_id).copied().unwrap_or(0)
    }

    fn txn_mut(&mut self, txn_id: u64) -> &mut HandoffTransaction {
        &mut self.txns[(txn_id - 1) as usize]
    }

    pub fn txn(&self, txn_id: u64) -> &HandoffTransaction {
        &self.txns[(txn_id - 1) as usize]
    }

    /// Install threshold subscriptions on every AP. Only the reactive
    /// policy listens for RSSI events.
    pub fn bootstrap_effects(&mut self) -> Vec<CtrlEffect> {
        let DecisionPolicy::MaxRssiHysteresis { .. } = self.cfg.policy else {
            return Vec::new();
        };
        self.aps
            .keys()
            .map(|ap| CtrlEffect::Send {
                to_ap: *ap,
                msg: ControlMessage::Subscribe {
                    sub_id: 1,
                    sta_filter: StaFilter::Any,
                    metric: "rssi".into(),
                    relation: Relation::Below,
                    threshold: self.cfg.publish_threshold_dbm,
                },
                track: None,
            })
            .collect()
    }

    /// Record that an effect's message hit the wire with sequence `seq`.
    pub fn register_outstanding(&mut self, seq: u64, txn_id: u64, kind: SendKind) {
        self.outstanding.insert(seq, (txn_id, kind));
        *self.sent_counts.entry(txn_id).or_insert(0) += 1;
    }

    fn new_txn(&mut self, sta_mac: MacAddr48, origin_ap: u32, now: SimTime) -> u64 {
        let txn_id = self.txns.len() as u64 + 1;
        self.txns.push(HandoffTransaction {
            txn_id,
            sta_mac,
            origin_ap,
            dest_ap: None,
            target_channel: None,
            csa_count: self.cfg.csa_count,
            phase: Phase::ScanRequested,
            abort_reason: None,
            created_at: now,
            deciding_at: None,
            cmd_time: None,
            switching_at: None,
            complete_at: None,
            aborted_at: None,
            origin_value: None,
            polled: BTreeSet::new(),
            responses: BTreeMap::new(),
        });
        self.active_by_sta.insert(sta_mac, txn_id);
        txn_id
    }

    fn abort(&mut self, txn_id: u64, reason: AbortReason, now: SimTime) -> Vec<CtrlEffect> {
        let txn = self.txn_mut(txn_id);
        txn.advance(Phase::Aborted, now);
        txn.abort_reason = Some(reason);
        let sta = txn.sta_mac;
        self.active_by_sta.remove(&sta);
        let mut effects = vec![CtrlEffect::Log {
            kind: "txn_abort",
            details: format!("txn={txn_id} reason={reason}"),
        }];
        for kind in [SendKind::Add, SendKind::Remove] {
            effects.push(CtrlEffect::CancelSend {
                tag: ScheduledTag { txn_id, kind },
            });
        }
        effects
    }

    /// A PUBLISH arrived. RSSI events open a reactive transaction with a
    /// scan fan-out; beacon_ack events complete the transaction that is in
    /// flight for the station.
    pub fn on_publish(
        &mut self,
        ap_id: u32,
        sta_mac: MacAddr48,
        metric: &str,
        value: f64,
        now: SimTime,
    ) -> Result<Vec<CtrlEffect>, CtrlError> {
        if metric == "beacon_ack" {
            return Ok(self.on_beacon_confirm(ap_id, sta_mac, now));
        }
        let origin = self
            .hosting_ap(&sta_mac)
            .ok_or(CtrlError::UnknownStation(sta_mac))?;
        let DecisionPolicy::MaxRssiHysteresis { .. } = self.cfg.policy else {
            return Ok(vec![CtrlEffect::Log {
                kind: "publish_ignored",
                details: format!("sta={sta_mac} metric={metric} policy=forced"),
            }]);
        };
        if let Some(active) = self.active_by_sta.get(&sta_mac) {
            return Ok(vec![CtrlEffect::Log {
                kind: "publish_ignored",
                details: format!("sta={sta_mac} active_txn={active}"),
            }]);
        }
        let origin_info = self.aps[&origin];
        let neighbors: Vec<u32> = self
            .aps
            .iter()
            .filter(|(id, info)| {
                **id != origin
                    && info.position.distance_to(&origin_info.position) <= self.cfg.neighbor_radius_m
            })
            .map(|(id, _)| *id)
            .collect();
        let txn_id = self.new_txn(sta_mac, origin, now);
        self.txn_mut(txn_id).origin_value = Some(value);
        if neighbors.is_empty() {
            return Ok(self.abort(txn_id, AbortReason::NoCandidates, now));
        }
        let mut effects = vec![CtrlEffect::Log {
            kind: "txn_start",
            details: format!("txn={txn_id} sta={sta_mac} origin=ap{origin} trigger=rssi"),
        }];
        for ap in &neighbors {
            self.txn_mut(txn_id).polled.insert(*ap);
            effects.push(CtrlEffect::Send {
                to_ap: *ap,
                msg: ControlMessage::ScanRequest {
                    req_id: txn_id,
                    channel: origin_info.channel,
                    sta_mac,
                    duration_ms: self.cfg.scan_duration_ms,
                },
                track: Some((txn_id, SendKind::Scan { ap_id: *ap })),
            });
        }
        effects.push(CtrlEffect::ArmDecisionTimer {
            at: now
                + u64::from(self.cfg.scan_duration_ms) * 1_000
                + ms_to_us(self.cfg.decision_slack_ms),
            txn_id,
        });
        Ok(effects)
    }

    fn on_beacon_confirm(
        &mut self,
        ap_id: u32,
        sta_mac: MacAddr48,
        now: SimTime,
    ) -> Vec<CtrlEffect> {
        let Some(txn_id) = self.active_txn_id(&sta_mac) else {
            return vec![CtrlEffect::Log {
                kind: "confirm_ignored",
                details: format!("sta={sta_mac} from=ap{ap_id} no_active_txn"),
            }];
        };
        let txn = self.txn_mut(txn_id);
        if txn.dest_ap != Some(ap_id) || txn.phase >= Phase::Complete {
            return vec![CtrlEffect::Log {
                kind: "confirm_ignored",
                details: format!("txn={txn_id} from=ap{ap_id}"),
            }];
        }
        txn.advance(Phase::Complete, now);
        self.active_by_sta.remove(&sta_mac);
        vec![CtrlEffect::Log {
            kind: "txn_complete",
            details: format!("txn={txn_id} sta={sta_mac} dest=ap{ap_id}"),
        }]
    }

    pub fn on_scan_response(
        &mut self,
        req_id: u64,
        ap_id: u32,
        rssi_dbm: Option<f64>,
        now: SimTime,
    ) -> Vec<CtrlEffect> {
        let stale = |details: String| {
            vec![CtrlEffect::Log {
                kind: "scan_response_ignored",
                details,
            }]
        };
        if req_id == 0 || req_id > self.txns.len() as u64 {
            return stale(format!("req={req_id} unknown"));
        }
        {
            let txn = self.txn_mut(req_id);
            if txn.phase != Phase::ScanRequested || !txn.polled.contains(&ap_id) {
                return stale(format!("req={req_id} from=ap{ap_id} phase={:?}", txn.phase));
            }
            txn.responses.insert(ap_id, rssi_dbm);
            if txn.responses.len() < txn.polled.len() {
                return Vec::new();
            }
        }
        self.decide_and_execute(req_id, now)
    }

    /// The decision timer fired; decide with whatever answers arrived.
    pub fn on_decision_timer(&mut self, txn_id: u64, now: SimTime) -> Vec<CtrlEffect> {
        if self.txn(txn_id).phase != Phase::ScanRequested {
            return Vec::new();
        }
        self.decide_and_execute(txn_id, now)
    }

    fn decide_and_execute(&mut self, txn_id: u64, now: SimTime) -> Vec<CtrlEffect> {
        let margin = match self.cfg.policy {
            DecisionPolicy::MaxRssiHysteresis { margin_db } => margin_db,
            DecisionPolicy::ForcedAlternate { .. } => 0.0,
        };
        let txn = self.txn_mut(txn_id);
        txn.advance(Phase::Deciding, now);
        let origin_value = txn.origin_value.unwrap_or(f64::NEG_INFINITY);
        match decide(&txn.responses, origin_value, margin) {
            Some(dest) => {
                let target = self.aps[&dest].channel;
                let txn = self.txn_mut(txn_id);
                txn.dest_ap = Some(dest);
                txn.target_channel = Some(target);
                self.execute_handoff(txn_id, now)
            }
            None => self.abort(txn_id, AbortReason::NoBetterAp, now),
        }
    }

    /// Emit the CSA command now and schedule the open-loop ADD/REMOVE pair
    /// around the predicted switch-completion instant.
    fn execute_handoff(&mut self, txn_id: u64, now: SimTime) -> Vec<CtrlEffect> {
        let cfg = self.cfg.clone();
        let txn = self.txn_mut(txn_id);
        txn.advance(Phase::CsaCountdown, now);
        let sta_mac = txn.sta_mac;
        let origin = txn.origin_ap;
        let dest = txn.dest_ap.expect("dest decided");
        let target = txn.target_channel.expect("channel decided");
        let countdown_us = u64::from(cfg.csa_count) * u64::from(cfg.burst_interval_ms) * 1_000;
        let t_switch = now + countdown_us;
        let offset_us = ms_to_us(cfg.add_margin_ms.abs().max(0.0));
        let t_add = if cfg.add_margin_ms >= 0.0 {
            t_switch + offset_us
        } else {
            t_switch.saturating_sub(offset_us).max(now)
        };
        let remove_off = ms_to_us(cfg.remove_delay_ms.abs());
        let t_remove = if cfg.remove_delay_ms >= 0.0 {
            t_switch + remove_off
        } else {
            t_switch.saturating_sub(remove_off).max(now)
        };
        let lvap = self.stations[&sta_mac].clone();
        vec![
            CtrlEffect::Log {
                kind: "txn_exec",
                details: format!(
                    "txn={txn_id} sta={sta_mac} origin=ap{origin} dest=ap{dest} ch={target} t_switch={t_switch}"
                ),
            },
            CtrlEffect::Send {
                to_ap: origin,
                msg: ControlMessage::SendCsa {
                    ap_id: origin,
                    sta_mac,
                    new_channel: target,
                    count: cfg.csa_count,
                    burst_interval_ms: cfg.burst_interval_ms,
                },
                track: Some((txn_id, SendKind::Csa)),
            },
            CtrlEffect::ScheduleSend {
                at: t_add,
                to_ap: dest,
                msg: ControlMessage::AddLvap {
                    ap_id: dest,
                    lvap,
                    channel: target,
                },
                track: Some((txn_id, SendKind::Add)),
                tag: ScheduledTag {
                    txn_id,
                    kind: SendKind::Add,
                },
            },
            CtrlEffect::ScheduleSend {
                at: t_remove,
                to_ap: origin,
                msg: ControlMessage::RemoveLvap {
                    ap_id: origin,
                    sta_mac,
                },
                track: Some((txn_id, SendKind::Remove)),
                tag: ScheduledTag {
                    txn_id,
                    kind: SendKind::Remove,
                },
            },
        ]
    }

    /// A scheduled send left the wire. The ADD send marks the predicted
    /// switch instant.
    pub fn on_scheduled_send_fired(&mut self, tag: ScheduledTag, now: SimTime) {
        if tag.kind == SendKind::Add {
            let txn = self.txn_mut(tag.txn_id);
            if txn.phase == Phase::CsaCountdown {
                txn.advance(Phase::Switching, now);
            }
        }
    }

    /// Forced-handoff tick: move every station to the other AP of the
    /// configured pair, skipping scan and decision phases.
    pub fn on_forced_tick(&mut self, now: SimTime) -> Result<Vec<CtrlEffect>, CtrlError> {
        let pair: Vec<u32> = self.aps.keys().take(2).copied().collect();
        if pair.len() < 2 {
            return Err(CtrlError::NotEnoughAps);
        }
        let stas: Vec<MacAddr48> = self.stations.keys().copied().collect();
        let mut effects = Vec::new();
        for sta_mac in stas {
            if let Some(stale) = self.active_by_sta.get(&sta_mac).copied() {
                effects.extend(self.abort(stale, AbortReason::Stale, now));
            }
            let origin = self.hosting[&sta_mac];
            let dest = if origin == pair[0] { pair[1] } else { pair[0] };
            let target = self.aps[&dest].channel;
            let txn_id = self.new_txn(sta_mac, origin, now);
            let txn = self.txn_mut(txn_id);
            txn.dest_ap = Some(dest);
            txn.target_channel = Some(target);
            txn.origin_value = None;
            // Forced transactions begin at the execution phase directly.
            txn.advance(Phase::Deciding, now);
            effects.push(CtrlEffect::Log {
                kind: "txn_start",
                details: format!("txn={txn_id} sta={sta_mac} origin=ap{origin} trigger=forced"),
            });
            effects.extend(self.execute_handoff(txn_id, now));
        }
        Ok(effects)
    }

    pub fn on_ack(&mut self, ref_id: u64, now: SimTime) -> Vec<CtrlEffect> {
        let Some((txn_id, kind)) = self.outstanding.remove(&ref_id) else {
            return Vec::new();
        };
        if kind == SendKind::Add && self.txn(txn_id).phase != Phase::Aborted {
            let sta = self.txn(txn_id).sta_mac;
            let dest = self.txn(txn_id).dest_ap.expect("acked add has dest");
            self.hosting.insert(sta, dest);
            return vec![CtrlEffect::Log {
                kind: "hosting_moved",
                details: format!("sta={sta} ap=ap{dest} at={now}"),
            }];
        }
        Vec::new()
    }

    /// An agent rejected a request. Scan errors count as a silent AP;
    /// CSA/ADD errors abort the transaction and suppress the REMOVE.
    pub fn on_error(&mut self, ref_id: u64, reason: &str, now: SimTime) -> Vec<CtrlEffect> {
        let Some((txn_id, kind)) = self.outstanding.remove(&ref_id) else {
            return Vec::new();
        };
        match kind {
            SendKind::Scan { ap_id } => self.on_scan_response(txn_id, ap_id, None, now),
            SendKind::Csa | SendKind::Add => {
                let mut effects = vec![CtrlEffect::Log {
                    kind: "agent_error",
                    details: format!("txn={txn_id} kind={kind:?} reason={reason}"),
                }];
                if self.txn(txn_id).phase != Phase::Aborted {
                    effects.extend(self.abort(txn_id, AbortReason::AgentError, now));
                }
                effects
            }
            SendKind::Remove | SendKind::Subscribe => vec![CtrlEffect::Log {
                kind: "agent_error",
                details: format!("txn={txn_id} kind={kind:?} reason={reason}"),
            }],
        }
    }
}
