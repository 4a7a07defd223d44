//! Radio channel model: per-channel frame delivery, received-signal
//! computation and Bernoulli packet loss. No contention, capture or fading;
//! a frame either misses the receiver's channel, is lost at random, or
//! arrives after the channel's one-way latency.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{NodeId, RngStream, SimTime};
use crate::types::{ChannelId, Position};

pub const DEFAULT_NOISE_FLOOR_DBM: f64 = -95.0;

/// Log-distance path loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub pl0_db: f64,
    pub d0_m: f64,
    pub exponent_n: f64,
}

impl PathLossModel {
    pub fn new(pl0_db: f64, d0_m: f64, exponent_n: f64) -> Self {
        assert!(d0_m > 0.0, "d0_m must be positive");
        assert!(exponent_n >= 2.0, "exponent_n must be >= 2");
        PathLossModel {
            pl0_db,
            d0_m,
            exponent_n,
        }
    }
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel::new(40.0, 1.0, 3.0)
    }
}

/// Received signal strength at `dist_m` meters from a transmitter at
/// `tx_power_dbm`. Distances inside the reference distance clamp to d0.
pub fn rssi_at(tx_power_dbm: f64, dist_m: f64, model: &PathLossModel) -> f64 {
    assert!(dist_m >= 0.0);
    let d = dist_m.max(model.d0_m);
    tx_power_dbm - (model.pl0_db + 10.0 * model.exponent_n * (d / model.d0_m).log10())
}

/// Loss and latency parameters for one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConditions {
    pub random_loss_prob: f64,
    pub one_way_latency_us: SimTime,
}

impl ChannelConditions {
    pub fn new(random_loss_prob: f64, one_way_latency_us: SimTime) -> Self {
        assert!(
            (0.0..=1.0).contains(&random_loss_prob),
            "loss probability out of [0,1]"
        );
        ChannelConditions {
            random_loss_prob,
            one_way_latency_us,
        }
    }
}

impl Default for ChannelConditions {
    fn default() -> Self {
        ChannelConditions::new(0.0, 0)
    }
}

/// Which physical interface of a node a frame is sent from or heard on.
/// APs carry a fixed-channel primary interface plus an auxiliary one used
/// for off-channel scans; stations have only a primary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Iface {
    Primary,
    Aux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RadioId {
    pub node: NodeId,
    pub iface: Iface,
}

impl RadioId {
    pub fn primary(node: NodeId) -> Self {
        RadioId {
            node,
            iface: Iface::Primary,
        }
    }

    pub fn aux(node: NodeId) -> Self {
        RadioId {
            node,
            iface: Iface::Aux,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Radio {
    channel: Option<ChannelId>,
    // A retuned radio stays deaf through this instant; it hears frames
    // arriving strictly after it.
    listen_after: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropCause {
    ChannelMismatch,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Delivered { at: SimTime },
    Dropped { cause: DropCause },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MediumError {
    #[error("radio {0:?} not registered")]
    UnknownRadio(RadioId),
    #[error("node {0} has no position")]
    UnknownNode(NodeId),
}

/// The shared air. Tracks every radio's tuning state, node positions and
/// transmit powers, and per-channel conditions.
#[derive(Debug)]
pub struct Medium {
    pub path_loss: PathLossModel,
    pub noise_floor_dbm: f64,
    default_conditions: ChannelConditions,
    per_channel: BTreeMap<u8, ChannelConditions>,
    radios: BTreeMap<RadioId, Radio>,
    positions: BTreeMap<NodeId, Position>,
    tx_power: BTreeMap<NodeId, f64>,
}

impl Medium {
    pub fn new(path_loss: PathLossModel, default_conditions: ChannelConditions) -> Self {
        Medium {
            path_loss,
            noise_floor_dbm: DEFAULT_NOISE_FLOOR_DBM,
            default_conditions,
            per_channel: BTreeMap::new(),
            radios: BTreeMap::new(),
            positions: BTreeMap::new(),
            tx_power: BTreeMap::new(),
        }
    }

    pub fn conditions(&self, channel: ChannelId) -> ChannelConditions {
        self.per_channel
            .get(&channel.index())
            .copied()
            .unwrap_or(self.default_conditions)
    }

    pub fn set_channel_conditions(&mut self, channel: ChannelId, cond: ChannelConditions) {
        self.per_channel.insert(channel.index(), cond);
    }

    pub fn register_node(&mut self, node: NodeId, position: Position, tx_power_dbm: f64) {
        self.positions.insert(node, position);
        self.tx_power.insert(node, tx_power_dbm);
    }

    pub fn register_radio(&mut self, radio: RadioId, channel: Option<ChannelId>) {
        self.radios.insert(
            radio,
            Radio {
                channel,
                listen_after: 0,
            },
        );
    }

    pub fn set_position(&mut self, node: NodeId, position: Position) {
        self.positions.insert(node, position);
    }

    pub fn position(&self, node: NodeId) -> Result<Position, MediumError> {
        self.positions
            .get(&node)
            .copied()
            .ok_or(MediumError::UnknownNode(node))
    }

    /// Retune a radio. It stays deaf through `listen_after` and hears the
    /// new channel only strictly afterwards. Pass `None` to park it.
    pub fn tune(&mut self, radio: RadioId, channel: Option<ChannelId>, listen_after: SimTime) {
        let r = self
            .radios
            .get_mut(&radio)
            .unwrap_or_else(|| panic!("tune of unregistered radio {radio:?}"));
        r.channel = channel;
        r.listen_after = listen_after;
    }

    pub fn tuned_channel(&self, radio: RadioId) -> Option<ChannelId> {
        self.radios.get(&radio).and_then(|r| r.channel)
    }

    /// Whether `radio` picks up a frame arriving on `channel` at time `at`.
    pub fn hears(&self, radio: RadioId, channel: ChannelId, at: SimTime) -> bool {
        match self.radios.get(&radio) {
            Some(r) => r.channel == Some(channel) && at > r.listen_after,
            None => false,
        }
    }

    /// Signal strength of `src`'s transmissions as seen at `dst`'s position.
    pub fn rssi_between(&self, src: NodeId, dst: NodeId) -> Result<f64, MediumError> {
        let sp = self.position(src)?;
        let dp = self.position(dst)?;
        let tx = *self
            .tx_power
            .get(&src)
            .ok_or(MediumError::UnknownNode(src))?;
        Ok(rssi_at(tx, sp.distance_to(&dp), &self.path_loss))
    }

    pub fn is_audible(&self, rssi_dbm: f64) -> bool {
        rssi_dbm >= self.noise_floor_dbm
    }

    /// Decide the fate of one frame from `src` to `dst` on `channel`,
    /// transmitted at `now`. The loss draw comes from the sender's stream so
    /// outcomes do not depend on unrelated nodes.
    pub fn deliver_frame(
        &self,
        src: RadioId,
        dst: RadioId,
        channel: ChannelId,
        frame_size_bytes: u32,
        now: SimTime,
        src_rng: &mut RngStream,
    ) -> Result<Delivery, MediumError> {
        assert!(frame_size_bytes > 0, "empty frame");
        let src_radio = self.radios.get(&src).ok_or(MediumError::UnknownRadio(src))?;
        if !self.radios.contains_key(&dst) {
            return Err(MediumError::UnknownRadio(dst));
        }
        let cond = self.conditions(channel);
        let rx_at = now + cond.one_way_latency_us;
        if src_radio.channel != Some(channel) || !self.hears(dst, channel, rx_at) {
            return Ok(Delivery::Dropped {
                cause: DropCause::ChannelMismatch,
            });
        }
        if src_rng.chance(cond.random_loss_prob) {
            return Ok(Delivery::Dropped {
                cause: DropCause::Random,
            });
        }
        Ok(Delivery::Delivered { at: rx_at })
    }
}

/// Time one beacon occupies the air: ceil(8·size/rate) microseconds.
pub fn beacon_airtime_us(beacon_size_bytes: u32, phy_rate_mbps: f64) -> u64 {
    assert!(phy_rate_mbps > 0.0);
    (8.0 * beacon_size_bytes as f64 / phy_rate_mbps).ceil() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(i: u16) -> ChannelId {
        ChannelId::new(i).unwrap()
    }

    fn basic_medium(loss: f64, latency: SimTime) -> Medium {
        let mut m = Medium::new(
            PathLossModel::default(),
            ChannelConditions::new(loss, latency),
        );
        m.register_node(NodeId::Ap(1), Position::new(0.0, 0.0), 20.0);
        m.register_node(NodeId::Sta(1), Position::new(10.0, 0.0), 20.0);
        m.register_radio(RadioId::primary(NodeId::Ap(1)), Some(ch(4)));
        m.register_radio(RadioId::primary(NodeId::Sta(1)), Some(ch(4)));
        m
    }

    #[test]
    fn rssi_reference_points() {
        let m = PathLossModel::default();
        assert_eq!(rssi_at(20.0, 1.0, &m), -20.0);
        assert_eq!(rssi_at(20.0, 10.0, &m), -50.0);
        assert!((rssi_at(20.0, 100.0, &m) - -80.0).abs() < 1e-9);
    }

    #[test]
    fn rssi_clamps_inside_reference_distance() {
        let m = PathLossModel::default();
        assert_eq!(rssi_at(20.0, 0.0, &m), -20.0);
        assert_eq!(rssi_at(20.0, 0.5, &m), -20.0);
    }

    #[test]
    fn rssi_monotone_in_distance() {
        let m = PathLossModel::default();
        let mut prev = f64::INFINITY;
        for i in 0..500 {
            let d = i as f64 * 0.37;
            let r = rssi_at(20.0, d, &m);
            assert!(r <= prev, "rssi rose at {d} m");
            prev = r;
        }
    }

    #[test]
    fn channel_mismatch_drops() {
        let mut medium = basic_medium(0.0, 0);
        medium.tune(RadioId::primary(NodeId::Sta(1)), Some(ch(9)), 0);
        let mut rng = RngStream::new(1, 1);
        let out = medium
            .deliver_frame(
                RadioId::primary(NodeId::Ap(1)),
                RadioId::primary(NodeId::Sta(1)),
                ch(4),
                100,
                1_000,
                &mut rng,
            )
            .unwrap();
        assert_eq!(
            out,
            Delivery::Dropped {
                cause: DropCause::ChannelMismatch
            }
        );
    }

    #[test]
    fn lossless_delivery_is_exact() {
        let medium = basic_medium(0.0, 2_000);
        let mut rng = RngStream::new(1, 1);
        let out = medium
            .deliver_frame(
                RadioId::primary(NodeId::Ap(1)),
                RadioId::primary(NodeId::Sta(1)),
                ch(4),
                100,
                5_000,
                &mut rng,
            )
            .unwrap();
        assert_eq!(out, Delivery::Delivered { at: 7_000 });
    }

    #[test]
    fn certain_loss_always_drops_random() {
        let medium = basic_medium(1.0, 0);
        let mut rng = RngStream::new(1, 1);
        for t in 1..200u64 {
            let out = medium
                .deliver_frame(
                    RadioId::primary(NodeId::Ap(1)),
                    RadioId::primary(NodeId::Sta(1)),
                    ch(4),
                    100,
                    t,
                    &mut rng,
                )
                .unwrap();
            assert_eq!(
                out,
                Delivery::Dropped {
                    cause: DropCause::Random
                }
            );
        }
    }

    #[test]
    fn empirical_loss_matches_probability() {
        let p = 0.1;
        let n = 20_000u32;
        let medium = basic_medium(p, 0);
        let mut rng = RngStream::new(42, 3);
        let mut drops = 0u32;
        for t in 1..=n as u64 {
            let out = medium
                .deliver_frame(
                    RadioId::primary(NodeId::Ap(1)),
                    RadioId::primary(NodeId::Sta(1)),
                    ch(4),
                    100,
                    t,
                    &mut rng,
                )
                .unwrap();
            if matches!(out, Delivery::Dropped { .. }) {
                drops += 1;
            }
        }
        let freq = drops as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (freq - p).abs() <= 3.0 * sigma,
            "freq {freq} vs p {p} (3 sigma = {})",
            3.0 * sigma
        );
    }

    #[test]
    fn retuned_radio_deaf_through_listen_after() {
        let mut medium = basic_medium(0.0, 0);
        let sta = RadioId::primary(NodeId::Sta(1));
        medium.tune(sta, Some(ch(4)), 10_000);
        assert!(!medium.hears(sta, ch(4), 9_999));
        assert!(!medium.hears(sta, ch(4), 10_000));
        assert!(medium.hears(sta, ch(4), 10_001));
    }

    #[test]
    fn parked_radio_hears_nothing() {
        let mut medium = basic_medium(0.0, 0);
        let sta = RadioId::primary(NodeId::Sta(1));
        medium.tune(sta, None, 0);
        assert!(!medium.hears(sta, ch(4), 1_000));
        assert!(!medium.hears(sta, ch(9), 1_000));
    }

    #[test]
    fn unknown_radio_is_an_error() {
        let medium = basic_medium(0.0, 0);
        let mut rng = RngStream::new(1, 1);
        let ghost = RadioId::primary(NodeId::Sta(99));
        assert!(matches!(
            medium.deliver_frame(
                ghost,
                RadioId::primary(NodeId::Sta(1)),
                ch(4),
                100,
                1,
                &mut rng
            ),
            Err(MediumError::UnknownRadio(_))
        ));
        assert!(matches!(
            medium.deliver_frame(
                RadioId::primary(NodeId::Ap(1)),
                ghost,
                ch(4),
                100,
                1,
                &mut rng
            ),
            Err(MediumError::UnknownRadio(_))
        ));
    }

    #[test]
    fn rssi_between_uses_positions_and_power() {
        let medium = basic_medium(0.0, 0);
        let r = medium.rssi_between(NodeId::Sta(1), NodeId::Ap(1)).unwrap();
        assert_eq!(r, -50.0);
        assert!(medium.is_audible(r));
        assert!(!medium.is_audible(-95.1));
        assert!(medium.is_audible(-95.0));
    }

    #[test]
    fn airtime_examples() {
        assert_eq!(beacon_airtime_us(125, 1.0), 1_000);
        assert_eq!(beacon_airtime_us(125, 10.0), 100);
        assert_eq!(beacon_airtime_us(100, 6.0), 134);
    }
}
