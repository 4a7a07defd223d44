//! The simulation world: owns the event kernel, the medium, the controller
//! and every node model, wires control messages over a fixed-latency
//! control network, drives traffic and mobility, records the event log and
//! packet traces, and checks the system invariants after the run.

use std::collections::BTreeMap;

use crate::apnode::{ApNode, ApNodeError, BeaconFrame};
use crate::controller::{
    Controller, CtrlConfig, CtrlEffect, DecisionPolicy, Phase, ScheduledTag, SendKind,
};
use crate::engine::{ms_to_us, stream_id_for, EventId, Kernel, NodeId, RngStream, SimTime};
use crate::medium::{ChannelConditions, Delivery, DropCause, Medium, RadioId};
use crate::metrics::{
    attribute_losses, default_window_us, estimate_gap, AttributionReport, EventRecord, GapOutcome,
    HandoffMeasurement, LossCause, MetricsError, PacketRecord, RunReport, TxnWindow,
};
use crate::protocol::{decode, encode, ControlMessage};
use crate::scenario::Scenario;
use crate::stanode::{Mobility, StaNode};
use crate::types::{allocate_bssid, Lvap, MacAddr48};

const MOBILITY_TICK_US: SimTime = 100_000;

/// Base for generated LVAP BSSIDs; locally administered, unicast.
pub const BSSID_BASE: MacAddr48 = MacAddr48([0x0a, 0x00, 0x00, 0x00, 0x00, 0x00]);

#[derive(Debug, Clone)]
enum Event {
    BeaconDue {
        ap: u32,
        sta: MacAddr48,
        epoch: u64,
    },
    BeaconRx {
        sta_idx: u32,
        frame: BeaconFrame,
    },
    WireDeliver {
        seq: u64,
        from: NodeId,
        to: NodeId,
        line: String,
    },
    PacketOffer {
        sta_idx: u32,
        seq: u64,
    },
    UplinkRx {
        ap: u32,
        sta_idx: u32,
        kind: UplinkKind,
    },
    SwitchStart {
        sta_idx: u32,
        epoch: u64,
    },
    SwitchDone {
        sta_idx: u32,
    },
    Resume {
        sta_idx: u32,
    },
    ScanEnd {
        ap: u32,
    },
    ForcedTick,
    DecisionTimer {
        txn_id: u64,
    },
    CtrlSend {
        tag: ScheduledTag,
        to_ap: u32,
        msg: ControlMessage,
        track: Option<(u64, SendKind)>,
    },
    MobilityTick,
}

#[derive(Debug, Clone, Copy)]
enum UplinkKind {
    Data { seq: u64 },
    BeaconAck,
}

#[derive(Debug, Clone, Copy, Default)]
struct TxnTimes {
    retune: Option<SimTime>,
    retune_done: Option<SimTime>,
    resume: Option<SimTime>,
    add_apply: Option<SimTime>,
    remove_apply: Option<SimTime>,
    first_dest_beacon: Option<SimTime>,
}

#[derive(Debug, Clone, Copy)]
struct HostChange {
    time: SimTime,
    sta: MacAddr48,
    ap: u32,
    channel: u8,
    added: bool,
}

pub struct World {
    kernel: Kernel<Event>,
    pub medium: Medium,
    pub ctrl: Controller,
    aps: BTreeMap<u32, ApNode>,
    stas: Vec<StaNode>,
    sta_tx_power: Vec<f64>,
    sta_idx: BTreeMap<MacAddr48, u32>,
    sta_rng: Vec<RngStream>,
    ap_rng: BTreeMap<u32, RngStream>,
    wire_seq: u64,
    wire_latency_us: SimTime,
    wire_txn: BTreeMap<u64, u64>,
    scheduled_sends: BTreeMap<ScheduledTag, EventId>,
    beacon_events: BTreeMap<(u32, MacAddr48), EventId>,
    pending_first_beacon: BTreeMap<(u32, MacAddr48), u64>,
    pub events: Vec<EventRecord>,
    records: Vec<Vec<PacketRecord>>,
    txn_times: BTreeMap<u64, TxnTimes>,
    host_changes: Vec<HostChange>,
    csa_last: BTreeMap<(u32, MacAddr48), u32>,
    violations: Vec<String>,
    scn: Scenario,
    duration_us: SimTime,
    end_us: SimTime,
    has_mobility: bool,
}

impl World {
    pub fn new(scn: &Scenario) -> World {
        let duration_us = ms_to_us(scn.duration_s * 1_000.0);
        let end_us = duration_us + ms_to_us(scn.drain_s * 1_000.0);
        let mut medium = Medium::new(
            scn.medium.path_loss,
            ChannelConditions::new(scn.medium.random_loss_prob, scn.medium.air_latency_us),
        );
        medium.noise_floor_dbm = scn.medium.noise_floor_dbm;
        let ctrl_cfg = CtrlConfig {
            neighbor_radius_m: scn.control.neighbor_radius_m,
            scan_duration_ms: scn.control.scan_duration_ms,
            decision_slack_ms: scn.control.decision_slack_ms,
            csa_count: scn.csa_count,
            burst_interval_ms: scn.beacons.policy.interval_burst_ms.round() as u32,
            remove_delay_ms: scn.remove_delay_ms,
            add_margin_ms: scn.add_margin_ms,
            publish_threshold_dbm: scn.control.subscription_threshold_dbm,
            policy: scn.policy,
        };
        let mut world = World {
            kernel: Kernel::new(),
            medium,
            ctrl: Controller::new(ctrl_cfg),
            aps: BTreeMap::new(),
            stas: Vec::new(),
            sta_tx_power: Vec::new(),
            sta_idx: BTreeMap::new(),
            sta_rng: Vec::new(),
            ap_rng: BTreeMap::new(),
            wire_seq: 0,
            wire_latency_us: ms_to_us(scn.control.wire_latency_ms),
            wire_txn: BTreeMap::new(),
            scheduled_sends: BTreeMap::new(),
            beacon_events: BTreeMap::new(),
            pending_first_beacon: BTreeMap::new(),
            events: Vec::new(),
            records: Vec::new(),
            txn_times: BTreeMap::new(),
            host_changes: Vec::new(),
            csa_last: BTreeMap::new(),
            violations: Vec::new(),
            scn: scn.clone(),
            duration_us,
            end_us,
            has_mobility: scn
                .stas
                .iter()
                .any(|s| !matches!(s.mobility, Mobility::Static)),
        };
        world.bootstrap();
        world
    }

    fn bootstrap(&mut self) {
        let scn = self.scn.clone();
        for ap in &scn.aps {
            let node = NodeId::Ap(ap.id);
            self.medium.register_node(node, ap.position, ap.tx_power_dbm);
            self.medium.register_radio(RadioId::primary(node), Some(ap.channel));
            self.medium.register_radio(RadioId::aux(node), None);
            self.ctrl.register_ap(ap.id, ap.position, ap.channel);
            let mut ap_node = ApNode::new(ap.id, ap.channel, scn.beacons.policy);
            ap_node.beacon_size_bytes = scn.beacons.size_bytes;
            ap_node.beacon_rate_mbps = scn.beacons.rate_mbps;
            ap_node.rssi_alpha = scn.control.rssi_alpha;
            ap_node.sub_cooldown_ms = scn.control.subscription_cooldown_ms;
            self.aps.insert(ap.id, ap_node);
            self.ap_rng
                .insert(ap.id, RngStream::new(scn.seed, stream_id_for(node)));
        }

        for (i, sta) in scn.stas.iter().enumerate() {
            let idx = i as u32;
            let node = NodeId::Sta(idx);
            self.medium.register_node(node, sta.position, sta.tx_power_dbm);
            // Bootstrap association: host at the AP whose beacons are
            // strongest at the STA's position; ties go to the lowest id.
            let host = scn
                .aps
                .iter()
                .map(|ap| {
                    let rssi = self
                        .medium
                        .rssi_between(NodeId::Ap(ap.id), node)
                        .expect("registered nodes");
                    (ap.id, rssi)
                })
                .fold(None::<(u32, f64)>, |best, (id, rssi)| match best {
                    Some((_, b)) if rssi <= b => best,
                    _ => Some((id, rssi)),
                })
                .expect("at least one AP")
                .0;
            let host_channel = self.aps[&host].channel;
            self.medium
                .register_radio(RadioId::primary(node), Some(host_channel));

            let bssid = allocate_bssid(i as u64, BSSID_BASE).expect("station count fits");
            let lvap = Lvap::new(sta.mac, bssid, sta.ip, &sta.ssid).expect("validated scenario");
            self.ctrl.register_station(lvap.clone(), host);
            self.sta_idx.insert(sta.mac, idx);
            self.stas.push(StaNode::new(
                sta.mac,
                bssid,
                sta.profile.clone(),
                host_channel,
                sta.position,
                sta.mobility.clone(),
            ));
            self.sta_tx_power.push(sta.tx_power_dbm);
            self.sta_rng.push(RngStream::new(scn.seed, stream_id_for(node)));
            self.records.push(Vec::new());

            let slot_epoch = {
                let ap_node = self.aps.get_mut(&host).expect("host exists");
                ap_node
                    .add_lvap(lvap, false)
                    .expect("unique station set")
                    .epoch
            };
            self.log(0, NodeId::Ap(host), "lvap_add", format!("sta={} txn=0 ch={host_channel} bssid={bssid}", sta.mac));
            self.host_changes.push(HostChange {
                time: 0,
                sta: sta.mac,
                ap: host,
                channel: host_channel.index(),
                added: true,
            });
            // Quiet air at t = 0: the first beacon fires one interval in.
            let first = ms_to_us(scn.beacons.policy.interval_normal_ms);
            let id = self.kernel.schedule_at(
                first,
                Event::BeaconDue {
                    ap: host,
                    sta: sta.mac,
                    epoch: slot_epoch,
                },
            );
            self.beacon_events.insert((host, sta.mac), id);
        }

        if let DecisionPolicy::ForcedAlternate { period_s } = scn.policy {
            let period = ms_to_us(period_s * 1_000.0);
            assert!(period > 0, "validated scenario");
            let mut t = period;
            while t <= self.duration_us {
                self.kernel.schedule_at(t, Event::ForcedTick);
                t += period;
            }
        }

        let fx = self.ctrl.bootstrap_effects();
        self.apply_ctrl_effects(fx, 0);

        for (idx, _) in scn.stas.iter().enumerate() {
            for (seq, at) in scn.traffic.offer_times().into_iter().enumerate() {
                self.kernel.schedule_at(
                    at,
                    Event::PacketOffer {
                        sta_idx: idx as u32,
                        seq: seq as u64,
                    },
                );
            }
        }

        if self.has_mobility {
            self.kernel.schedule_at(MOBILITY_TICK_US, Event::MobilityTick);
        }
    }

    pub fn run(&mut self) {
        while let Some((now, ev)) = self.kernel.pop_due(self.end_us) {
            self.dispatch(ev, now);
        }
        self.kernel.advance_to(self.end_us);
    }

    pub fn now(&self) -> SimTime {
        self.kernel.now()
    }

    pub fn ap(&self, id: u32) -> &ApNode {
        &self.aps[&id]
    }

    pub fn sta(&self, idx: u32) -> &StaNode {
        &self.stas[idx as usize]
    }

    fn log(&mut self, time: SimTime, target: NodeId, kind: &str, details: String) {
        self.events.push(EventRecord {
            time_us: time,
            target: target.to_string(),
            kind: kind.to_string(),
            details,
        });
    }

    fn log_violation(&mut self, time: SimTime, rule: &str, details: String) {
        self.violations.push(format!("{rule}: {details}"));
        self.events.push(EventRecord {
            time_us: time,
            target: "world".to_string(),
            kind: "violation".to_string(),
            details: format!("rule={rule} {details}"),
        });
    }

    fn send_wire(&mut self, from: NodeId, to: NodeId, msg: &ControlMessage, now: SimTime) -> u64 {
        self.wire_seq += 1;
        let seq = self.wire_seq;
        let line = encode(msg);
        let trimmed = line.trim_end().to_string();
        self.log(now, from, "wire_tx", format!("seq={seq} dst={to} {trimmed}"));
        self.kernel.schedule_at(
            now + self.wire_latency_us,
            Event::WireDeliver {
                seq,
                from,
                to,
                line,
            },
        );
        seq
    }

    fn apply_ctrl_effects(&mut self, effects: Vec<CtrlEffect>, now: SimTime) {
        for fx in effects {
            match fx {
                CtrlEffect::Send { to_ap, msg, track } => {
                    let seq = self.send_wire(NodeId::Controller, NodeId::Ap(to_ap), &msg, now);
                    if let Some((txn, kind)) = track {
                        self.ctrl.register_outstanding(seq, txn, kind);
                        self.wire_txn.insert(seq, txn);
                    }
                }
                CtrlEffect::ScheduleSend {
                    at,
                    to_ap,
                    msg,
                    track,
                    tag,
                } => {
                    let id = self.kernel.schedule_at(
                        at.max(now),
                        Event::CtrlSend {
                            tag,
                            to_ap,
                            msg,
                            track,
                        },
                    );
                    self.scheduled_sends.insert(tag, id);
                }
                CtrlEffect::CancelSend { tag } => {
                    if let Some(id) = self.scheduled_sends.remove(&tag) {
                        self.kernel.cancel(id);
                    }
                }
                CtrlEffect::ArmDecisionTimer { at, txn_id } => {
                    self.kernel
                        .schedule_at(at.max(now), Event::DecisionTimer { txn_id });
                }
                CtrlEffect::Log { kind, details } => {
                    self.log(now, NodeId::Controller, kind, details);
                }
            }
        }
    }

    fn dispatch(&mut self, ev: Event, now: SimTime) {
        match ev {
            Event::BeaconDue { ap, sta, epoch } => self.on_beacon_due(ap, sta, epoch, now),
            Event::BeaconRx { sta_idx, frame } => self.on_beacon_rx(sta_idx, frame, now),
            Event::WireDeliver { seq, from, to, line } => self.on_wire(seq, from, to, line, now),
            Event::PacketOffer { sta_idx, seq } => self.on_packet_offer(sta_idx, seq, now),
            Event::UplinkRx { ap, sta_idx, kind } => self.on_uplink_rx(ap, sta_idx, kind, now),
            Event::SwitchStart { sta_idx, epoch } => self.on_switch_start(sta_idx, epoch, now),
            Event::SwitchDone { sta_idx } => self.on_switch_done(sta_idx, now),
            Event::Resume { sta_idx } => self.on_resume(sta_idx, now),
            Event::ScanEnd { ap } => self.on_scan_end(ap, now),
            Event::ForcedTick => {
                let fx = self
                    .ctrl
                    .on_forced_tick(now)
                    .expect("scenario validation guarantees two APs");
                self.apply_ctrl_effects(fx, now);
            }
            Event::DecisionTimer { txn_id } => {
                let fx = self.ctrl.on_decision_timer(txn_id, now);
                self.apply_ctrl_effects(fx, now);
            }
            Event::CtrlSend {
                tag,
                to_ap,
                msg,
                track,
            } => {
                self.scheduled_sends.remove(&tag);
                let seq = self.send_wire(NodeId::Controller, NodeId::Ap(to_ap), &msg, now);
                if let Some((txn, kind)) = track {
                    self.ctrl.register_outstanding(seq, txn, kind);
                    self.wire_txn.insert(seq, txn);
                }
                self.ctrl.on_scheduled_send_fired(tag, now);
            }
            Event::MobilityTick => {
                for (i, sta) in self.stas.iter().enumerate() {
                    if !matches!(sta.mobility, Mobility::Static) {
                        let pos = sta.position_at(now);
                        self.medium.set_position(NodeId::Sta(i as u32), pos);
                    }
                }
                if now + MOBILITY_TICK_US <= self.duration_us {
                    self.kernel
                        .schedule_at(now + MOBILITY_TICK_US, Event::MobilityTick);
                }
            }
        }
    }

    fn on_beacon_due(&mut self, ap: u32, sta: MacAddr48, epoch: u64, now: SimTime) {
        self.beacon_events.remove(&(ap, sta));
        let Some(em) = self
            .aps
            .get_mut(&ap)
            .and_then(|a| a.emit_beacon(&sta, epoch, now))
        else {
            return;
        };
        let csa_str = match em.frame.csa {
            Some((ch, n)) => format!("ch={ch} count={n}"),
            None => "-".to_string(),
        };
        if em.frame.dst == MacAddr48::BROADCAST {
            self.log_violation(now, "unicast_beacon", format!("ap{ap} broadcast beacon"));
        }
        self.log(
            now,
            NodeId::Ap(ap),
            "beacon_tx",
            format!("sta={sta} bssid={} csa={csa_str}", em.frame.bssid),
        );
        self.check_csa_sequence(ap, sta, em.frame.csa.map(|c| c.1), now);

        // First beacon the destination sends after its ADD_LVAP applied.
        if let Some(txn_id) = self.pending_first_beacon.remove(&(ap, sta)) {
            self.txn_times.entry(txn_id).or_default().first_dest_beacon = Some(now);
        }

        // Schedule the slot's next beacon before delivering this one.
        let id = self.kernel.schedule_at(
            now + em.next_in,
            Event::BeaconDue {
                ap,
                sta,
                epoch: em.epoch,
            },
        );
        self.beacon_events.insert((ap, sta), id);

        let Some(&sta_idx) = self.sta_idx.get(&sta) else {
            return;
        };
        let rng = self.ap_rng.get_mut(&ap).expect("registered ap");
        let delivery = self
            .medium
            .deliver_frame(
                RadioId::primary(NodeId::Ap(ap)),
                RadioId::primary(NodeId::Sta(sta_idx)),
                em.frame.channel,
                self.scn.beacons.size_bytes,
                now,
                rng,
            )
            .expect("registered radios");
        if let Delivery::Delivered { at } = delivery {
            self.kernel.schedule_at(
                at,
                Event::BeaconRx {
                    sta_idx,
                    frame: em.frame,
                },
            );
        }
    }

    fn check_csa_sequence(&mut self, ap: u32, sta: MacAddr48, csa: Option<u32>, now: SimTime) {
        match csa {
            Some(n) => {
                if let Some(&prev) = self.csa_last.get(&(ap, sta)) {
                    if n + 1 != prev {
                        self.log_violation(
                            now,
                            "csa_countdown",
                            format!("ap{ap} sta={sta} count {prev} -> {n}"),
                        );
                    }
                }
                if n == 0 {
                    self.csa_last.remove(&(ap, sta));
                } else {
                    self.csa_last.insert((ap, sta), n);
                }
            }
            None => {
                if let Some(prev) = self.csa_last.remove(&(ap, sta)) {
                    self.log_violation(
                        now,
                        "csa_countdown",
                        format!("ap{ap} sta={sta} countdown stopped at {prev}"),
                    );
                }
            }
        }
    }

    fn on_beacon_rx(&mut self, sta_idx: u32, frame: BeaconFrame, now: SimTime) {
        let sta = &mut self.stas[sta_idx as usize];
        if frame.bssid != sta.bssid || frame.dst != sta.sta_mac {
            return;
        }
        let csa_str = match frame.csa {
            Some((ch, n)) => format!("ch={ch} count={n}"),
            None => "-".to_string(),
        };
        let reaction = sta.on_beacon(&frame, now);
        let epoch = sta.switch_epoch;
        let sta_mac = sta.sta_mac;
        self.log(
            now,
            NodeId::Sta(sta_idx),
            "beacon_rx",
            format!("ap=ap{} csa={csa_str}", frame.ap_id),
        );
        if let Some(at) = reaction.schedule_switch {
            self.kernel
                .schedule_at(at, Event::SwitchStart { sta_idx, epoch });
        }
        if reaction.resumed_now {
            self.note_resume(sta_idx, sta_mac, now);
        }
        if let Some(at) = reaction.schedule_resume {
            self.kernel.schedule_at(at, Event::Resume { sta_idx });
        }
        if reaction.ack {
            self.uplink_tx(
                sta_idx,
                frame.ap_id,
                UplinkKind::BeaconAck,
                self.scn.beacons.size_bytes,
                now,
            );
        }
    }

    fn note_resume(&mut self, sta_idx: u32, sta_mac: MacAddr48, now: SimTime) {
        let txn = self.ctrl.active_txn_id(&sta_mac);
        if let Some(txn_id) = txn {
            self.txn_times.entry(txn_id).or_default().resume = Some(now);
        }
        self.log(
            now,
            NodeId::Sta(sta_idx),
            "resume",
            format!("sta={sta_mac} txn={}", txn.unwrap_or(0)),
        );
    }

    /// One station transmission: sample it into any active scans, then
    /// deliver it to the target AP's primary radio.
    fn uplink_tx(
        &mut self,
        sta_idx: u32,
        to_ap: u32,
        kind: UplinkKind,
        size: u32,
        now: SimTime,
    ) {
        let sta_node = NodeId::Sta(sta_idx);
        let sta_mac = self.stas[sta_idx as usize].sta_mac;
        let channel = self.stas[sta_idx as usize].tuned_channel;

        let scanning: Vec<u32> = self
            .aps
            .iter()
            .filter(|(id, a)| {
                **id != to_ap
                    && matches!(
                        a.aux_state(),
                        crate::types::AuxState::Scanning { channel: c, .. } if c == channel
                    )
                    && self.medium.hears(RadioId::aux(NodeId::Ap(**id)), channel, now)
            })
            .map(|(id, _)| *id)
            .collect();
        for ap in scanning {
            let rssi = self
                .medium
                .rssi_between(sta_node, NodeId::Ap(ap))
                .expect("registered nodes");
            if self.medium.is_audible(rssi) {
                self.aps
                    .get_mut(&ap)
                    .expect("scanning ap")
                    .record_scan_sample(sta_mac, rssi);
            }
        }

        let rng = &mut self.sta_rng[sta_idx as usize];
        let delivery = self
            .medium
            .deliver_frame(
                RadioId::primary(sta_node),
                RadioId::primary(NodeId::Ap(to_ap)),
                channel,
                size,
                now,
                rng,
            )
            .expect("registered radios");
        match (delivery, kind) {
            (Delivery::Delivered { at }, _) => {
                self.kernel.schedule_at(
                    at,
                    Event::UplinkRx {
                        ap: to_ap,
                        sta_idx,
                        kind,
                    },
                );
            }
            (Delivery::Dropped { cause }, UplinkKind::Data { seq }) => {
                let truth = match cause {
                    DropCause::Random => LossCause::Random,
                    DropCause::ChannelMismatch => LossCause::Handoff,
                };
                self.mark_lost(sta_idx, seq, truth, now);
            }
            (Delivery::Dropped { .. }, UplinkKind::BeaconAck) => {}
        }
    }

    fn mark_lost(&mut self, sta_idx: u32, seq: u64, truth: LossCause, now: SimTime) {
        let rec = &mut self.records[sta_idx as usize][seq as usize];
        debug_assert!(rec.rx_time_us.is_none());
        rec.truth_cause = Some(truth);
        let cause = LossCause::label(Some(truth));
        self.log(
            now,
            NodeId::Sta(sta_idx),
            "pkt_drop",
            format!("seq={seq} cause={cause}"),
        );
    }

    fn on_packet_offer(&mut self, sta_idx: u32, seq: u64, now: SimTime) {
        debug_assert_eq!(self.records[sta_idx as usize].len(), seq as usize);
        self.records[sta_idx as usize].push(PacketRecord {
            seq,
            tx_time_us: now,
            rx_time_us: None,
            size_bytes: self.scn.traffic.payload_bytes,
            truth_cause: None,
            est_cause: None,
        });
        let sta = &self.stas[sta_idx as usize];
        if !sta.can_transmit() {
            self.mark_lost(sta_idx, seq, LossCause::Handoff, now);
            return;
        }
        let channel = sta.tuned_channel;
        let sta_mac = sta.sta_mac;
        // The uplink goes to whichever AP hosts this station's LVAP on the
        // channel the station is tuned to.
        let host = self
            .aps
            .iter()
            .find(|(_, a)| a.channel == channel && a.hosts(&sta_mac))
            .map(|(id, _)| *id);
        let Some(host) = host else {
            self.mark_lost(sta_idx, seq, LossCause::Handoff, now);
            return;
        };
        self.uplink_tx(
            sta_idx,
            host,
            UplinkKind::Data { seq },
            self.scn.traffic.payload_bytes,
            now,
        );
    }

    fn on_uplink_rx(&mut self, ap: u32, sta_idx: u32, kind: UplinkKind, now: SimTime) {
        let sta_mac = self.stas[sta_idx as usize].sta_mac;
        match kind {
            UplinkKind::Data { seq } => {
                let rec = &mut self.records[sta_idx as usize][seq as usize];
                rec.rx_time_us = Some(now);
                let rssi = self
                    .medium
                    .rssi_between(NodeId::Sta(sta_idx), NodeId::Ap(ap))
                    .expect("registered nodes");
                let publishes = self
                    .aps
                    .get_mut(&ap)
                    .expect("routed ap")
                    .observe_uplink(sta_mac, rssi, now);
                for msg in publishes {
                    self.log(
                        now,
                        NodeId::Ap(ap),
                        "publish",
                        format!("sta={sta_mac} metric=rssi"),
                    );
                    self.send_wire(NodeId::Ap(ap), NodeId::Controller, &msg, now);
                }
            }
            UplinkKind::BeaconAck => {
                let confirmed = self
                    .aps
                    .get_mut(&ap)
                    .map(|a| a.on_beacon_ack(&sta_mac))
                    .unwrap_or(false);
                if confirmed {
                    self.log(
                        now,
                        NodeId::Ap(ap),
                        "beacon_confirm",
                        format!("sta={sta_mac}"),
                    );
                    let msg = ControlMessage::Publish {
                        ap_id: ap,
                        sta_mac,
                        metric: "beacon_ack".to_string(),
                        value: 1.0,
                        at: now,
                    };
                    self.send_wire(NodeId::Ap(ap), NodeId::Controller, &msg, now);
                }
            }
        }
    }

    fn on_switch_start(&mut self, sta_idx: u32, epoch: u64, now: SimTime) {
        let sta = &mut self.stas[sta_idx as usize];
        let sta_mac = sta.sta_mac;
        let Some(start) = sta.switch_start(epoch, now) else {
            return;
        };
        self.medium.tune(
            RadioId::primary(NodeId::Sta(sta_idx)),
            Some(start.new_channel),
            start.deaf_until,
        );
        let txn = self.ctrl.active_txn_id(&sta_mac);
        if let Some(txn_id) = txn {
            self.txn_times.entry(txn_id).or_default().retune = Some(now);
        }
        self.log(
            now,
            NodeId::Sta(sta_idx),
            "retune_start",
            format!(
                "sta={sta_mac} txn={} ch={} deaf_until={}",
                txn.unwrap_or(0),
                start.new_channel,
                start.deaf_until
            ),
        );
        self.kernel
            .schedule_at(start.deaf_until, Event::SwitchDone { sta_idx });
    }

    fn on_switch_done(&mut self, sta_idx: u32, now: SimTime) {
        let sta = &mut self.stas[sta_idx as usize];
        let sta_mac = sta.sta_mac;
        let resumed = sta.switch_done(now);
        let txn = self.ctrl.active_txn_id(&sta_mac);
        if let Some(txn_id) = txn {
            self.txn_times.entry(txn_id).or_default().retune_done = Some(now);
        }
        self.log(
            now,
            NodeId::Sta(sta_idx),
            "retune_done",
            format!("sta={sta_mac} txn={}", txn.unwrap_or(0)),
        );
        if resumed {
            self.note_resume(sta_idx, sta_mac, now);
        }
    }

    fn on_resume(&mut self, sta_idx: u32, now: SimTime) {
        let sta = &mut self.stas[sta_idx as usize];
        let sta_mac = sta.sta_mac;
        sta.resume();
        self.note_resume(sta_idx, sta_mac, now);
    }

    fn on_scan_end(&mut self, ap: u32, now: SimTime) {
        let Some((req_id, rssi)) = self.aps.get_mut(&ap).and_then(|a| a.end_scan()) else {
            return;
        };
        self.medium.tune(RadioId::aux(NodeId::Ap(ap)), None, now);
        let rssi_str = rssi.map(|r| format!("{r}")).unwrap_or("none".to_string());
        self.log(
            now,
            NodeId::Ap(ap),
            "scan_end",
            format!("req={req_id} rssi={rssi_str}"),
        );
        let msg = ControlMessage::ScanResponse {
            req_id,
            ap_id: ap,
            rssi_dbm: rssi,
        };
        self.send_wire(NodeId::Ap(ap), NodeId::Controller, &msg, now);
    }

    fn on_wire(&mut self, seq: u64, from: NodeId, to: NodeId, line: String, now: SimTime) {
        let msg = decode(&line).expect("wire carries only encodable messages");
        let trimmed = line.trim_end().to_string();
        self.log(now, to, "wire_rx", format!("seq={seq} src={from} {trimmed}"));
        match to {
            NodeId::Controller => {
                let fx = match msg {
                    ControlMessage::Publish {
                        ap_id,
                        sta_mac,
                        metric,
                        value,
                        ..
                    } => match self.ctrl.on_publish(ap_id, sta_mac, &metric, value, now) {
                        Ok(fx) => fx,
                        Err(e) => {
                            vec![CtrlEffect::Log {
                                kind: "publish_rejected",
                                details: e.to_string(),
                            }]
                        }
                    },
                    ControlMessage::ScanResponse {
                        req_id,
                        ap_id,
                        rssi_dbm,
                    } => self.ctrl.on_scan_response(req_id, ap_id, rssi_dbm, now),
                    ControlMessage::Ack { ref_id } => self.ctrl.on_ack(ref_id, now),
                    ControlMessage::Error { ref_id, reason } => {
                        self.ctrl.on_error(ref_id, &reason, now)
                    }
                    other => panic!("unexpected northbound message {other:?}"),
                };
                self.apply_ctrl_effects(fx, now);
            }
            NodeId::Ap(ap_id) => self.on_ap_command(ap_id, seq, msg, now),
            NodeId::Sta(_) => panic!("stations have no wire interface"),
        }
    }

    fn on_ap_command(&mut self, ap_id: u32, seq: u64, msg: ControlMessage, now: SimTime) {
        let reply = match msg {
            ControlMessage::Subscribe {
                sub_id,
                sta_filter,
                metric,
                relation,
                threshold,
            } => {
                self.aps
                    .get_mut(&ap_id)
                    .expect("addressed ap")
                    .install_subscription(sub_id, sta_filter, metric, relation, threshold);
                Some(Ok(()))
            }
            ControlMessage::ScanRequest {
                req_id,
                channel,
                sta_mac,
                duration_ms,
            } => {
                let res = self.aps.get_mut(&ap_id).expect("addressed ap").begin_scan(
                    req_id,
                    channel,
                    sta_mac,
                    duration_ms,
                    now,
                );
                match res {
                    Ok(until) => {
                        self.medium.tune(RadioId::aux(NodeId::Ap(ap_id)), Some(channel), now);
                        self.log(
                            now,
                            NodeId::Ap(ap_id),
                            "scan_start",
                            format!("req={req_id} ch={channel} sta={sta_mac} until={until}"),
                        );
                        self.kernel.schedule_at(until, Event::ScanEnd { ap: ap_id });
                        None
                    }
                    Err(e) => Some(Err(e)),
                }
            }
            ControlMessage::SendCsa {
                sta_mac,
                new_channel,
                count,
                burst_interval_ms,
                ..
            } => {
                let res = self.aps.get_mut(&ap_id).expect("addressed ap").start_csa(
                    &sta_mac,
                    new_channel,
                    count,
                    u64::from(burst_interval_ms) * 1_000,
                );
                if res.is_ok() {
                    // Replace the pending beacon: the countdown starts now.
                    if let Some(id) = self.beacon_events.remove(&(ap_id, sta_mac)) {
                        self.kernel.cancel(id);
                    }
                    let epoch = self.aps[&ap_id].slot(&sta_mac).expect("slot exists").epoch;
                    let id = self.kernel.schedule_at(
                        now,
                        Event::BeaconDue {
                            ap: ap_id,
                            sta: sta_mac,
                            epoch,
                        },
                    );
                    self.beacon_events.insert((ap_id, sta_mac), id);
                    self.log(
                        now,
                        NodeId::Ap(ap_id),
                        "csa_start",
                        format!("sta={sta_mac} ch={new_channel} count={count}"),
                    );
                }
                Some(res.map(|_| ()))
            }
            ControlMessage::AddLvap { lvap, channel, .. } => {
                let sta_mac = lvap.sta_mac;
                let bssid = lvap.bssid;
                let res = self
                    .aps
                    .get_mut(&ap_id)
                    .expect("addressed ap")
                    .add_lvap(lvap, true);
                match res {
                    Ok(slot) => {
                        let epoch = slot.epoch;
                        let txn = self.wire_txn.get(&seq).copied().unwrap_or(0);
                        if txn != 0 {
                            self.txn_times.entry(txn).or_default().add_apply = Some(now);
                            self.pending_first_beacon.insert((ap_id, sta_mac), txn);
                        }
                        self.log(
                            now,
                            NodeId::Ap(ap_id),
                            "lvap_add",
                            format!("sta={sta_mac} txn={txn} ch={channel} bssid={bssid}"),
                        );
                        self.host_changes.push(HostChange {
                            time: now,
                            sta: sta_mac,
                            ap: ap_id,
                            channel: channel.index(),
                            added: true,
                        });
                        let id = self.kernel.schedule_at(
                            now,
                            Event::BeaconDue {
                                ap: ap_id,
                                sta: sta_mac,
                                epoch,
                            },
                        );
                        self.beacon_events.insert((ap_id, sta_mac), id);
                        Some(Ok(()))
                    }
                    Err(e) => Some(Err(e)),
                }
            }
            ControlMessage::RemoveLvap { sta_mac, .. } => {
                let channel = self.aps[&ap_id].channel;
                let res = self
                    .aps
                    .get_mut(&ap_id)
                    .expect("addressed ap")
                    .remove_lvap(&sta_mac);
                match res {
                    Ok(_) => {
                        if let Some(id) = self.beacon_events.remove(&(ap_id, sta_mac)) {
                            self.kernel.cancel(id);
                        }
                        self.pending_first_beacon.remove(&(ap_id, sta_mac));
                        let txn = self.wire_txn.get(&seq).copied().unwrap_or(0);
                        if txn != 0 {
                            self.txn_times.entry(txn).or_default().remove_apply = Some(now);
                        }
                        self.log(
                            now,
                            NodeId::Ap(ap_id),
                            "lvap_remove",
                            format!("sta={sta_mac} txn={txn}"),
                        );
                        self.host_changes.push(HostChange {
                            time: now,
                            sta: sta_mac,
                            ap: ap_id,
                            channel: channel.index(),
                            added: false,
                        });
                        Some(Ok(()))
                    }
                    Err(e) => Some(Err(e)),
                }
            }
            other => panic!("unexpected southbound message {other:?}"),
        };
        match reply {
            Some(Ok(())) => {
                let msg = ControlMessage::Ack { ref_id: seq };
                self.send_wire(NodeId::Ap(ap_id), NodeId::Controller, &msg, now);
            }
            Some(Err(e)) => {
                let msg = ControlMessage::Error {
                    ref_id: seq,
                    reason: error_token(&e),
                };
                self.send_wire(NodeId::Ap(ap_id), NodeId::Controller, &msg, now);
            }
            None => {}
        }
    }

    /// Post-run invariant checks, gap estimation and report assembly.
    pub fn finalize(&mut self) -> (RunReport, Vec<String>) {
        self.check_ordering_invariant();
        self.check_single_host();
        self.check_message_bound();

        let mut measurements = Vec::new();
        let windows: Vec<TxnWindow> = self
            .ctrl
            .txns()
            .iter()
            .filter_map(|t| {
                Some(TxnWindow {
                    txn_id: t.txn_id,
                    cmd_time_us: t.cmd_time?,
                    complete_time_us: t.complete_at?,
                })
            })
            .collect();
        let guard_us = ms_to_us(self.scn.guard_ms);

        let txns: Vec<(u64, MacAddr48, u32, Option<u32>, Option<SimTime>)> = self
            .ctrl
            .txns()
            .iter()
            .map(|t| (t.txn_id, t.sta_mac, t.origin_ap, t.dest_ap, t.cmd_time))
            .collect();
        for (txn_id, sta_mac, origin_ap, dest_ap, cmd_time) in txns {
            let Some(cmd) = cmd_time else { continue };
            let sta_idx = self.sta_idx[&sta_mac] as usize;
            let profile = &self.stas[sta_idx].profile;
            let window = default_window_us(
                self.scn.csa_count,
                ms_to_us(self.scn.beacons.policy.interval_burst_ms),
                ms_to_us(profile.switch_latency_ms),
                profile.beacons_required,
                ms_to_us(profile.resume_jitter_ms),
            );
            let outcome = match estimate_gap(
                &self.records[sta_idx],
                cmd,
                window,
                self.scn.gap_mode,
            ) {
                Ok(o) => o,
                Err(MetricsError::WindowBeyondTrace { .. }) | Err(MetricsError::EmptyTrace) => {
                    // The handoff happened after the traffic stopped; it
                    // cannot leave a footprint in the trace.
                    GapOutcome::Undetectable
                }
            };
            let times = self.txn_times.get(&txn_id).copied().unwrap_or_default();
            measurements.push(HandoffMeasurement {
                txn_id,
                sta: sta_mac,
                origin_ap,
                dest_ap,
                cmd_time_us: cmd,
                retune_time_us: times.retune,
                resume_time_us: times.resume,
                outcome,
            });
        }

        let mut records = self.records.first().cloned().unwrap_or_default();
        let attribution = attribute_losses(&mut records, &windows, guard_us);
        let summary = crate::metrics::summarize(
            &records,
            &measurements,
            &attribution,
            self.scn.beacons.policy.interval_burst_ms,
        );
        let report = RunReport {
            records,
            measurements,
            summary: vec![summary],
            events: self.events.clone(),
        };
        (report, self.violations.clone())
    }

    pub fn attribution_for(&self, sta_idx: u32, guard_us: SimTime) -> (Vec<PacketRecord>, AttributionReport) {
        let windows: Vec<TxnWindow> = self
            .ctrl
            .txns()
            .iter()
            .filter_map(|t| {
                Some(TxnWindow {
                    txn_id: t.txn_id,
                    cmd_time_us: t.cmd_time?,
                    complete_time_us: t.complete_at?,
                })
            })
            .collect();
        let mut records = self.records[sta_idx as usize].clone();
        let report = attribute_losses(&mut records, &windows, guard_us);
        (records, report)
    }

    fn check_ordering_invariant(&mut self) {
        let completed: Vec<u64> = self
            .ctrl
            .txns()
            .iter()
            .filter(|t| t.phase == Phase::Complete)
            .map(|t| t.txn_id)
            .collect();
        for txn_id in completed {
            let Some(times) = self.txn_times.get(&txn_id).copied() else {
                self.log_violation(
                    self.end_us,
                    "handoff_ordering",
                    format!("txn={txn_id} completed without recorded events"),
                );
                continue;
            };
            let (Some(retune), Some(add), Some(beacon), Some(remove)) = (
                times.retune,
                times.add_apply,
                times.first_dest_beacon,
                times.remove_apply,
            ) else {
                self.log_violation(
                    self.end_us,
                    "handoff_ordering",
                    format!(
                        "txn={txn_id} missing events retune={:?} add={:?} beacon={:?} remove={:?}",
                        times.retune, times.add_apply, times.first_dest_beacon, times.remove_apply
                    ),
                );
                continue;
            };
            if !(retune <= add && add <= beacon && beacon <= remove) {
                self.log_violation(
                    self.end_us,
                    "handoff_ordering",
                    format!(
                        "txn={txn_id} retune={retune} add={add} first_beacon={beacon} remove={remove}"
                    ),
                );
            }
        }
    }

    fn check_single_host(&mut self) {
        let mut per_sta: BTreeMap<MacAddr48, Vec<HostChange>> = BTreeMap::new();
        for c in &self.host_changes {
            per_sta.entry(c.sta).or_default().push(*c);
        }
        let mut violations = Vec::new();
        for (sta, changes) in per_sta {
            let mut hosts: BTreeMap<u32, u8> = BTreeMap::new();
            for c in changes {
                if c.added {
                    hosts.insert(c.ap, c.channel);
                } else {
                    hosts.remove(&c.ap);
                }
                match hosts.len() {
                    1 => {}
                    2 => {
                        let chans: Vec<u8> = hosts.values().copied().collect();
                        if chans[0] == chans[1] {
                            violations.push((
                                c.time,
                                format!("sta={sta} dual-hosted on one channel at {}", c.time),
                            ));
                        }
                    }
                    n => {
                        violations.push((
                            c.time,
                            format!("sta={sta} has {n} hosting APs at {}", c.time),
                        ));
                    }
                }
            }
        }
        for (time, details) in violations {
            self.log_violation(time, "single_host", details);
        }
    }

    fn check_message_bound(&mut self) {
        let over: Vec<(u64, u32, usize)> = self
            .ctrl
            .txns()
            .iter()
            .map(|t| (t.txn_id, self.ctrl.sent_count(t.txn_id), t.polled_count()))
            .filter(|(_, sent, polled)| *sent as usize > polled + 5)
            .collect();
        for (txn_id, sent, polled) in over {
            self.log_violation(
                self.end_us,
                "message_bound",
                format!("txn={txn_id} sent {sent} > {} allowed", polled + 5),
            );
        }
    }
}

fn error_token(e: &ApNodeError) -> String {
    match e {
        ApNodeError::DuplicateLvap(_) => "duplicate_lvap".to_string(),
        ApNodeError::UnknownLvap(_) => "unknown_lvap".to_string(),
        ApNodeError::CsaInProgress(_) => "csa_in_progress".to_string(),
        ApNodeError::AuxBusy(_) => "aux_busy".to_string(),
    }
}
