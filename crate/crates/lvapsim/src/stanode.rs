//! Station model. The STA never roams on its own and never re-associates:
//! it obeys CSA countdowns from its one stable BSSID, goes idle across the
//! channel switch until it has heard enough beacons, and otherwise relays a
//! constant-rate uplink flow.

use crate::apnode::BeaconFrame;
use crate::engine::{ms_to_us, SimTime};
use crate::types::{ChannelId, DeviceProfile, MacAddr48, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaMode {
    Active,
    Switching { until: SimTime },
    AwaitingBeacons { heard: u32 },
}

/// Waypoint mobility. Linear paths start at the first waypoint at t=0 and
/// stop at the last one.
#[derive(Debug, Clone, PartialEq)]
pub enum Mobility {
    Static,
    Linear {
        waypoints: Vec<Position>,
        speed_mps: f64,
    },
}

impl Mobility {
    pub fn position_at(&self, initial: Position, t: SimTime) -> Position {
        match self {
            Mobility::Static => initial,
            Mobility::Linear {
                waypoints,
                speed_mps,
            } => {
                let mut remaining = speed_mps * t as f64 / 1_000_000.0;
                let mut pos = waypoints[0];
                for next in &waypoints[1..] {
                    let seg = pos.distance_to(next);
                    if remaining < seg {
                        let f = remaining / seg;
                        return Position::new(
                            pos.x + (next.x - pos.x) * f,
                            pos.y + (next.y - pos.y) * f,
                        );
                    }
                    remaining -= seg;
                    pos = *next;
                }
                pos
            }
        }
    }
}

/// What the world must do after feeding a beacon to the station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BeaconReaction {
    /// (Re-)schedule the channel switch to fire at this instant.
    pub schedule_switch: Option<SimTime>,
    /// The station acknowledged the beacon; inform the emitting AP.
    pub ack: bool,
    /// The station resumed transmission at this processing instant.
    pub resumed_now: bool,
    /// Resume is due later (non-zero resume jitter).
    pub schedule_resume: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchStart {
    pub new_channel: ChannelId,
    pub deaf_until: SimTime,
}

#[derive(Debug)]
pub struct StaNode {
    pub sta_mac: MacAddr48,
    /// BSSID of record; constant for the station's whole lifetime.
    pub bssid: MacAddr48,
    pub profile: DeviceProfile,
    pub tuned_channel: ChannelId,
    pub mode: StaMode,
    pub mobility: Mobility,
    pub initial_position: Position,
    pending_switch: Option<(SimTime, ChannelId)>,
    resume_pending: bool,
    /// Guards stale switch events after a countdown re-pin.
    pub switch_epoch: u64,
}

impl StaNode {
    pub fn new(
        sta_mac: MacAddr48,
        bssid: MacAddr48,
        profile: DeviceProfile,
        tuned_channel: ChannelId,
        initial_position: Position,
        mobility: Mobility,
    ) -> Self {
        StaNode {
            sta_mac,
            bssid,
            profile,
            tuned_channel,
            mode: StaMode::Active,
            mobility,
            initial_position,
            pending_switch: None,
            resume_pending: false,
            switch_epoch: 0,
        }
    }

    pub fn position_at(&self, t: SimTime) -> Position {
        self.mobility.position_at(self.initial_position, t)
    }

    /// Whether a data frame offered right now leaves the radio. Idle modes
    /// drop the packet on the floor; there is no transmit buffering.
    pub fn can_transmit(&self) -> bool {
        self.mode == StaMode::Active
    }

    /// Process one received beacon. Only beacons from the station's own
    /// BSSID addressed to it count; the caller filters delivery.
    pub fn on_beacon(&mut self, frame: &BeaconFrame, now: SimTime) -> BeaconReaction {
        debug_assert_eq!(frame.dst, self.sta_mac);
        debug_assert_eq!(frame.bssid, self.bssid);
        let mut r = BeaconReaction::default();
        if let Some((new_channel, count)) = frame.csa {
            if self.mode == StaMode::Active {
                // Any countdown beacon pins the switch instant: count more
                // intervals from now. Later beacons on the same countdown
                // predict the same instant, so lost beacons cannot strand
                // the station.
                let at = now + u64::from(count) * frame.interval_us;
                if self.pending_switch != Some((at, new_channel)) {
                    self.pending_switch = Some((at, new_channel));
                    self.switch_epoch += 1;
                    r.schedule_switch = Some(at);
                }
                r.ack = true;
            }
            return r;
        }
        match self.mode {
            StaMode::Active => {
                r.ack = true;
            }
            StaMode::AwaitingBeacons { heard } => {
                let heard = heard + 1;
                self.mode = StaMode::AwaitingBeacons { heard };
                if heard >= self.profile.beacons_required && !self.resume_pending {
                    let jitter = ms_to_us(self.profile.resume_jitter_ms);
                    if jitter == 0 {
                        self.mode = StaMode::Active;
                        r.resumed_now = true;
                        r.ack = true;
                    } else {
                        self.resume_pending = true;
                        r.schedule_resume = Some(now + jitter);
                    }
                }
            }
            StaMode::Switching { .. } => {}
        }
        r
    }

    /// The pinned switch instant arrived: leave the old channel. The radio
    /// is deaf until `deaf_until`; the caller retunes the medium radio with
    /// that listen guard and schedules `switch_done`.
    pub fn switch_start(&mut self, epoch: u64, now: SimTime) -> Option<SwitchStart> {
        if epoch != self.switch_epoch {
            return None;
        }
        let (at, new_channel) = self.pending_switch.take()?;
        debug_assert_eq!(at, now);
        let deaf_until = now + ms_to_us(self.profile.switch_latency_ms);
        self.tuned_channel = new_channel;
        self.mode = StaMode::Switching { until: deaf_until };
        Some(SwitchStart {
            new_channel,
            deaf_until,
        })
    }

    /// Retune finished: start counting beacons on the new channel. With
    /// beacons_required == 0 the station resumes immediately.
    pub fn switch_done(&mut self, now: SimTime) -> bool {
        debug_assert!(matches!(self.mode, StaMode::Switching { until } if until == now));
        if self.profile.beacons_required == 0 {
            self.mode = StaMode::Active;
            true
        } else {
            self.mode = StaMode::AwaitingBeacons { heard: 0 };
            false
        }
    }

    /// Deferred resume (non-zero jitter profiles).
    pub fn resume(&mut self) {
        debug_assert!(self.resume_pending);
        self.resume_pending = false;
        self.mode = StaMode::Active;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DeviceProfile;

    fn mac(s: &str) -> MacAddr48 {
        s.parse().unwrap()
    }

    fn ch(i: u16) -> ChannelId {
        ChannelId::new(i).unwrap()
    }

    fn beacon(csa: Option<(ChannelId, u32)>, interval_us: SimTime) -> BeaconFrame {
        BeaconFrame {
            ap_id: 1,
            bssid: mac("0a:00:00:00:00:01"),
            dst: mac("00:1b:b1:00:00:01"),
            channel: ch(4),
            interval_us,
            csa,
        }
    }

    fn sta(profile: DeviceProfile) -> StaNode {
        StaNode::new(
            mac("00:1b:b1:00:00:01"),
            mac("0a:00:00:00:00:01"),
            profile,
            ch(4),
            Position::new(0.0, 0.0),
            Mobility::Static,
        )
    }

    #[test]
    fn full_countdown_switches_at_zero_and_retunes_after_latency() {
        let profile = DeviceProfile::new("test", 20.0, 2, 0.0).unwrap();
        let mut s = sta(profile);
        let mut t = 1_000_000;
        let mut switch_at = None;
        for count in (0..=4).rev() {
            let r = s.on_beacon(&beacon(Some((ch(9), count)), 10_000), t);
            if let Some(at) = r.schedule_switch {
                switch_at = Some(at);
            }
            t += 10_000;
        }
        // Every beacon predicts the same instant: the 0-count arrival.
        assert_eq!(switch_at, Some(1_040_000));
        let st = s.switch_start(s.switch_epoch, 1_040_000).unwrap();
        assert_eq!(st.new_channel, ch(9));
        assert_eq!(st.deaf_until, 1_060_000);
        assert_eq!(s.mode, StaMode::Switching { until: 1_060_000 });
        assert_eq!(s.tuned_channel, ch(9));
        assert!(!s.switch_done(1_060_000));
        assert_eq!(s.mode, StaMode::AwaitingBeacons { heard: 0 });
    }

    #[test]
    fn lost_zero_count_beacon_does_not_strand() {
        let profile = DeviceProfile::new("test", 20.0, 1, 0.0).unwrap();
        let mut s = sta(profile);
        // Only the count-3 beacon is heard.
        let r = s.on_beacon(&beacon(Some((ch(9), 3)), 10_000), 500_000);
        assert_eq!(r.schedule_switch, Some(530_000));
        // Count-2 and count-1 heard: same prediction, no rescheduling.
        assert_eq!(
            s.on_beacon(&beacon(Some((ch(9), 2)), 10_000), 510_000)
                .schedule_switch,
            None
        );
        assert_eq!(
            s.on_beacon(&beacon(Some((ch(9), 1)), 10_000), 520_000)
                .schedule_switch,
            None
        );
        assert!(s.switch_start(s.switch_epoch, 530_000).is_some());
    }

    #[test]
    fn stale_switch_epoch_ignored() {
        let profile = DeviceProfile::fastcard();
        let mut s = sta(profile);
        s.on_beacon(&beacon(Some((ch(9), 2)), 10_000), 100_000);
        let old_epoch = s.switch_epoch;
        // A re-pinned countdown with a different instant bumps the epoch.
        s.on_beacon(&beacon(Some((ch(9), 2)), 20_000), 110_000);
        assert!(s.switch_start(old_epoch, 120_000).is_none());
        assert!(s.switch_start(s.switch_epoch, 150_000).is_some());
    }

    #[test]
    fn awaiting_counts_beacons_then_resumes() {
        let profile = DeviceProfile::new("test", 15.0, 2, 0.0).unwrap();
        let mut s = sta(profile);
        s.on_beacon(&beacon(Some((ch(9), 0)), 10_000), 2_000_000);
        s.switch_start(s.switch_epoch, 2_000_000).unwrap();
        s.switch_done(2_015_000);
        assert!(!s.can_transmit());
        let r1 = s.on_beacon(&beacon(None, 10_000), 2_020_000);
        assert!(!r1.resumed_now && !r1.ack);
        assert_eq!(s.mode, StaMode::AwaitingBeacons { heard: 1 });
        let r2 = s.on_beacon(&beacon(None, 10_000), 2_030_000);
        assert!(r2.resumed_now && r2.ack);
        assert!(s.can_transmit());
    }

    #[test]
    fn zero_beacons_required_resumes_at_retune() {
        let profile = DeviceProfile::new("test", 5.0, 0, 0.0).unwrap();
        let mut s = sta(profile);
        s.on_beacon(&beacon(Some((ch(9), 0)), 10_000), 0);
        s.switch_start(s.switch_epoch, 0).unwrap();
        assert!(s.switch_done(5_000));
        assert!(s.can_transmit());
    }

    #[test]
    fn resume_jitter_defers_activation() {
        let profile = DeviceProfile::new("test", 5.0, 1, 3.0).unwrap();
        let mut s = sta(profile);
        s.on_beacon(&beacon(Some((ch(9), 0)), 10_000), 0);
        s.switch_start(s.switch_epoch, 0).unwrap();
        s.switch_done(5_000);
        let r = s.on_beacon(&beacon(None, 10_000), 9_000);
        assert_eq!(r.schedule_resume, Some(12_000));
        assert!(!r.ack && !r.resumed_now);
        assert!(!s.can_transmit());
        // Further beacons while the resume is pending do not double-fire.
        let r2 = s.on_beacon(&beacon(None, 10_000), 10_000);
        assert_eq!(r2.schedule_resume, None);
        s.resume();
        assert!(s.can_transmit());
    }

    #[test]
    fn idle_modes_refuse_transmission() {
        let profile = DeviceProfile::new("test", 10.0, 1, 0.0).unwrap();
        let mut s = sta(profile);
        assert!(s.can_transmit());
        s.on_beacon(&beacon(Some((ch(9), 0)), 10_000), 100);
        s.switch_start(s.switch_epoch, 100).unwrap();
        assert!(!s.can_transmit());
        s.switch_done(10_100);
        assert!(!s.can_transmit());
    }

    #[test]
    fn active_beacons_are_acked_and_liveness_only() {
        let profile = DeviceProfile::midcard();
        let mut s = sta(profile);
        let r = s.on_beacon(&beacon(None, 100_000), 50_000);
        assert!(r.ack);
        assert_eq!(r.schedule_switch, None);
        assert_eq!(s.mode, StaMode::Active);
    }

    #[test]
    fn mobility_straight_segment_kinematics() {
        let m = Mobility::Linear {
            waypoints: vec![Position::new(0.0, 0.0), Position::new(14.0, 0.0)],
            speed_mps: 1.4,
        };
        let start = Position::new(0.0, 0.0);
        assert_eq!(m.position_at(start, 0).x, 0.0);
        let half = m.position_at(start, 5_000_000);
        assert!((half.x - 7.0).abs() < 1e-9);
        let done = m.position_at(start, 10_000_000);
        assert!((done.x - 14.0).abs() < 1e-9);
        // Past the last waypoint the station stays put.
        assert_eq!(m.position_at(start, 20_000_000).x, 14.0);
    }

    #[test]
    fn mobility_turns_at_waypoints() {
        let m = Mobility::Linear {
            waypoints: vec![
                Position::new(0.0, 0.0),
                Position::new(10.0, 0.0),
                Position::new(10.0, 10.0),
            ],
            speed_mps: 1.0,
        };
        let start = Position::new(0.0, 0.0);
        let p = m.position_at(start, 15_000_000);
        assert!((p.x - 10.0).abs() < 1e-9);
        assert!((p.y - 5.0).abs() < 1e-9);
    }

    #[test]
    fn static_mobility_is_constant() {
        let m = Mobility::Static;
        let start = Position::new(3.0, 4.0);
        assert_eq!(m.position_at(start, 123_456_789), start);
    }
}
