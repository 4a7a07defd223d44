//! Scenario files: a TOML schema with strict key checking, defaults for
//! omitted optional fields, and validation errors that name the offending
//! field.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::controller::DecisionPolicy;
use crate::medium::PathLossModel;
use crate::metrics::{GapMode, TrafficSpec};
use crate::stanode::Mobility;
use crate::types::{BeaconPolicy, ChannelId, DeviceProfile, Ipv4Addr, MacAddr48, Position};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario syntax error: {0}")]
    Syntax(String),
    #[error("scenario field `{field}`: {msg}")]
    Validation { field: String, msg: String },
}

fn invalid(field: &str, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.to_string(),
        msg: msg.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    seed: Option<u64>,
    duration_s: f64,
    #[serde(default = "default_drain_s")]
    drain_s: f64,
    #[serde(default = "default_csa_count")]
    csa_count: u32,
    #[serde(default = "default_remove_delay_ms")]
    remove_delay_ms: f64,
    #[serde(default)]
    add_margin_ms: f64,
    #[serde(default)]
    guard_ms: f64,
    #[serde(default = "default_gap_mode")]
    gap_mode: String,
    #[serde(default)]
    beacons: RawBeacons,
    #[serde(default)]
    medium: RawMedium,
    #[serde(default)]
    control: RawControl,
    policy: RawPolicy,
    #[serde(default)]
    traffic: RawTraffic,
    aps: Vec<RawAp>,
    stas: Vec<RawSta>,
    #[serde(default)]
    profiles: BTreeMap<String, RawProfile>,
}

fn default_drain_s() -> f64 {
    2.0
}
fn default_csa_count() -> u32 {
    4
}
fn default_remove_delay_ms() -> f64 {
    50.0
}
fn default_gap_mode() -> String {
    "last-received".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeacons {
    #[serde(default = "default_normal_interval")]
    normal_interval_ms: f64,
    #[serde(default = "default_burst_interval")]
    burst_interval_ms: f64,
    #[serde(default = "default_burst_count")]
    burst_count: u32,
    #[serde(default = "default_beacon_size")]
    size_bytes: u32,
    #[serde(default = "default_beacon_rate")]
    rate_mbps: f64,
}

fn default_normal_interval() -> f64 {
    100.0
}
fn default_burst_interval() -> f64 {
    10.0
}
fn default_burst_count() -> u32 {
    20
}
fn default_beacon_size() -> u32 {
    125
}
fn default_beacon_rate() -> f64 {
    1.0
}

impl Default for RawBeacons {
    fn default() -> Self {
        RawBeacons {
            normal_interval_ms: default_normal_interval(),
            burst_interval_ms: default_burst_interval(),
            burst_count: default_burst_count(),
            size_bytes: default_beacon_size(),
            rate_mbps: default_beacon_rate(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMedium {
    #[serde(default = "default_pl0")]
    pl0_db: f64,
    #[serde(default = "default_d0")]
    d0_m: f64,
    #[serde(default = "default_exponent")]
    exponent_n: f64,
    #[serde(default = "default_floor")]
    noise_floor_dbm: f64,
    #[serde(default)]
    random_loss_prob: f64,
    #[serde(default)]
    air_latency_us: u64,
}

fn default_pl0() -> f64 {
    40.0
}
fn default_d0() -> f64 {
    1.0
}
fn default_exponent() -> f64 {
    3.0
}
fn default_floor() -> f64 {
    -95.0
}

impl Default for RawMedium {
    fn default() -> Self {
        RawMedium {
            pl0_db: default_pl0(),
            d0_m: default_d0(),
            exponent_n: default_exponent(),
            noise_floor_dbm: default_floor(),
            random_loss_prob: 0.0,
            air_latency_us: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    #[serde(default = "default_wire_latency")]
    wire_latency_ms: f64,
    #[serde(default = "default_scan_duration")]
    scan_duration_ms: u32,
    #[serde(default = "default_decision_slack")]
    decision_slack_ms: f64,
    #[serde(default = "default_neighbor_radius")]
    neighbor_radius_m: f64,
    #[serde(default = "default_sub_threshold")]
    subscription_threshold_dbm: f64,
    #[serde(default = "default_sub_cooldown")]
    subscription_cooldown_ms: f64,
    #[serde(default = "default_rssi_alpha")]
    rssi_alpha: f64,
}

fn default_wire_latency() -> f64 {
    1.0
}
fn default_scan_duration() -> u32 {
    40
}
fn default_decision_slack() -> f64 {
    20.0
}
fn default_neighbor_radius() -> f64 {
    100.0
}
fn default_sub_threshold() -> f64 {
    -70.0
}
fn default_sub_cooldown() -> f64 {
    2000.0
}
fn default_rssi_alpha() -> f64 {
    0.5
}

impl Default for RawControl {
    fn default() -> Self {
        RawControl {
            wire_latency_ms: default_wire_latency(),
            scan_duration_ms: default_scan_duration(),
            decision_slack_ms: default_decision_slack(),
            neighbor_radius_m: default_neighbor_radius(),
            subscription_threshold_dbm: default_sub_threshold(),
            subscription_cooldown_ms: default_sub_cooldown(),
            rssi_alpha: default_rssi_alpha(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    kind: String,
    period_s: Option<f64>,
    margin_db: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraffic {
    #[serde(default = "default_packet_interval")]
    packet_interval_ms: f64,
    #[serde(default = "default_payload")]
    payload_bytes: u32,
}

fn default_packet_interval() -> f64 {
    10.0
}
fn default_payload() -> u32 {
    80
}

impl Default for RawTraffic {
    fn default() -> Self {
        RawTraffic {
            packet_interval_ms: default_packet_interval(),
            payload_bytes: default_payload(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAp {
    id: u32,
    x: f64,
    y: f64,
    channel: u16,
    #[serde(default = "default_tx_power")]
    tx_power_dbm: f64,
}

fn default_tx_power() -> f64 {
    20.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSta {
    mac: String,
    ip: String,
    ssid: String,
    profile: String,
    x: f64,
    y: f64,
    #[serde(default = "default_tx_power")]
    tx_power_dbm: f64,
    mobility: Option<RawMobility>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMobility {
    waypoints: Vec<[f64; 2]>,
    speed_mps: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    switch_latency_ms: f64,
    beacons_required: u32,
    #[serde(default)]
    resume_jitter_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BeaconSettings {
    pub policy: BeaconPolicy,
    pub size_bytes: u32,
    pub rate_mbps: f64,
}

#[derive(Debug, Clone)]
pub struct MediumSettings {
    pub path_loss: PathLossModel,
    pub noise_floor_dbm: f64,
    pub random_loss_prob: f64,
    pub air_latency_us: u64,
}

#[derive(Debug, Clone)]
pub struct ControlSettings {
    pub wire_latency_ms: f64,
    pub scan_duration_ms: u32,
    pub decision_slack_ms: f64,
    pub neighbor_radius_m: f64,
    pub subscription_threshold_dbm: f64,
    pub subscription_cooldown_ms: f64,
    pub rssi_alpha: f64,
}

#[derive(Debug, Clone)]
pub struct ApConfig {
    pub id: u32,
    pub position: Position,
    pub channel: ChannelId,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone)]
pub struct StaConfig {
    pub mac: MacAddr48,
    pub ip: Ipv4Addr,
    pub ssid: String,
    pub profile: DeviceProfile,
    pub position: Position,
    pub tx_power_dbm: f64,
    pub mobility: Mobility,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub duration_s: f64,
    pub drain_s: f64,
    pub csa_count: u32,
    pub remove_delay_ms: f64,
    pub add_margin_ms: f64,
    pub guard_ms: f64,
    pub gap_mode: GapMode,
    pub beacons: BeaconSettings,
    pub medium: MediumSettings,
    pub control: ControlSettings,
    pub policy: DecisionPolicy,
    pub traffic: TrafficSpec,
    pub aps: Vec<ApConfig>,
    pub stas: Vec<StaConfig>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<(Scenario, Vec<String>), ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Scenario::parse(&text)
    }

    pub fn parse(text: &str) -> Result<(Scenario, Vec<String>), ScenarioError> {
        let raw: RawScenario =
            toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
        let mut warnings = Vec::new();
        let seed = match raw.seed {
            Some(s) => s,
            None => {
                warnings.push("seed missing; defaulting to 1".to_string());
                1
            }
        };
        let scenario = build(raw, seed)?;
        Ok((scenario, warnings))
    }
}

fn build(raw: RawScenario, seed: u64) -> Result<Scenario, ScenarioError> {
    if !(raw.duration_s > 0.0) {
        return Err(invalid("duration_s", "must be > 0"));
    }
    if raw.drain_s < 0.0 {
        return Err(invalid("drain_s", "must be >= 0"));
    }
    if raw.csa_count == 0 {
        return Err(invalid("csa_count", "must be >= 1"));
    }
    let gap_mode = GapMode::parse(&raw.gap_mode)
        .ok_or_else(|| invalid("gap_mode", "expected `last-received` or `first-lost`"))?;

    let b = &raw.beacons;
    if b.burst_interval_ms.fract() != 0.0 || b.burst_interval_ms < 1.0 {
        return Err(invalid(
            "beacons.burst_interval_ms",
            "must be a whole number of milliseconds >= 1",
        ));
    }
    let policy = BeaconPolicy::new(b.normal_interval_ms, b.burst_interval_ms, b.burst_count)
        .map_err(|e| invalid("beacons", e.to_string()))?;
    if b.size_bytes == 0 {
        return Err(invalid("beacons.size_bytes", "must be > 0"));
    }
    if !(b.rate_mbps > 0.0) {
        return Err(invalid("beacons.rate_mbps", "must be > 0"));
    }
    let beacons = BeaconSettings {
        policy,
        size_bytes: b.size_bytes,
        rate_mbps: b.rate_mbps,
    };

    let m = &raw.medium;
    if !(m.d0_m > 0.0) {
        return Err(invalid("medium.d0_m", "must be > 0"));
    }
    if m.exponent_n < 2.0 {
        return Err(invalid("medium.exponent_n", "must be >= 2"));
    }
    if !(0.0..=1.0).contains(&m.random_loss_prob) {
        return Err(invalid("medium.random_loss_prob", "must be in [0, 1]"));
    }
    let medium = MediumSettings {
        path_loss: PathLossModel {
            pl0_db: m.pl0_db,
            d0_m: m.d0_m,
            exponent_n: m.exponent_n,
        },
        noise_floor_dbm: m.noise_floor_dbm,
        random_loss_prob: m.random_loss_prob,
        air_latency_us: m.air_latency_us,
    };

    let c = &raw.control;
    if c.wire_latency_ms < 0.0 {
        return Err(invalid("control.wire_latency_ms", "must be >= 0"));
    }
    if c.scan_duration_ms == 0 {
        return Err(invalid("control.scan_duration_ms", "must be >= 1"));
    }
    if !(0.0..=1.0).contains(&c.rssi_alpha) {
        return Err(invalid("control.rssi_alpha", "must be in [0, 1]"));
    }
    if !(c.neighbor_radius_m > 0.0) {
        return Err(invalid("control.neighbor_radius_m", "must be > 0"));
    }
    let control = ControlSettings {
        wire_latency_ms: c.wire_latency_ms,
        scan_duration_ms: c.scan_duration_ms,
        decision_slack_ms: c.decision_slack_ms,
        neighbor_radius_m: c.neighbor_radius_m,
        subscription_threshold_dbm: c.subscription_threshold_dbm,
        subscription_cooldown_ms: c.subscription_cooldown_ms,
        rssi_alpha: c.rssi_alpha,
    };

    let policy = match raw.policy.kind.as_str() {
        "forced" => {
            let period = raw
                .policy
                .period_s
                .ok_or_else(|| invalid("policy.period_s", "required for kind = \"forced\""))?;
            if !(period > 0.0) {
                return Err(invalid("policy.period_s", "must be > 0"));
            }
            DecisionPolicy::ForcedAlternate { period_s: period }
        }
        "max_rssi" => DecisionPolicy::MaxRssiHysteresis {
            margin_db: raw.policy.margin_db.unwrap_or(6.0),
        },
        other => {
            return Err(invalid(
                "policy.kind",
                format!("unknown policy `{other}`; expected `forced` or `max_rssi`"),
            ))
        }
    };

    let traffic = TrafficSpec {
        packet_interval_ms: raw.traffic.packet_interval_ms,
        payload_bytes: raw.traffic.payload_bytes,
        duration_s: raw.duration_s,
    };
    traffic
        .validate()
        .map_err(|msg| invalid("traffic", msg))?;

    if raw.aps.is_empty() {
        return Err(invalid("aps", "at least one AP is required"));
    }
    if raw.stas.is_empty() {
        return Err(invalid("stas", "at least one STA is required"));
    }
    if matches!(policy, DecisionPolicy::ForcedAlternate { .. }) && raw.aps.len() < 2 {
        return Err(invalid("policy.kind", "forced policy needs at least two APs"));
    }

    let mut aps = Vec::new();
    let mut seen_ids = std::collections::BTreeSet::new();
    for (i, ap) in raw.aps.iter().enumerate() {
        let field = |name: &str| format!("aps[{i}].{name}");
        if !seen_ids.insert(ap.id) {
            return Err(invalid(&field("id"), format!("duplicate AP id {}", ap.id)));
        }
        let channel = ChannelId::new(ap.channel)
            .map_err(|e| invalid(&field("channel"), e.to_string()))?;
        aps.push(ApConfig {
            id: ap.id,
            position: Position::new(ap.x, ap.y),
            channel,
            tx_power_dbm: ap.tx_power_dbm,
        });
    }

    let mut stas = Vec::new();
    let mut seen_macs = std::collections::BTreeSet::new();
    for (i, sta) in raw.stas.iter().enumerate() {
        let field = |name: &str| format!("stas[{i}].{name}");
        let mac: MacAddr48 = sta
            .mac
            .parse()
            .map_err(|e: crate::types::MacParseError| invalid(&field("mac"), e.to_string()))?;
        if !seen_macs.insert(mac) {
            return Err(invalid(&field("mac"), format!("duplicate STA MAC {mac}")));
        }
        let ip: Ipv4Addr = sta
            .ip
            .parse()
            .map_err(|_| invalid(&field("ip"), format!("invalid IPv4 address `{}`", sta.ip)))?;
        let profile = resolve_profile(&sta.profile, &raw.profiles)
            .ok_or_else(|| invalid(&field("profile"), format!("unknown profile `{}`", sta.profile)))?
            .map_err(|msg| invalid(&format!("profiles.{}", sta.profile), msg))?;
        let mobility = match &sta.mobility {
            None => Mobility::Static,
            Some(m) => {
                if m.waypoints.is_empty() {
                    return Err(invalid(
                        &field("mobility.waypoints"),
                        "at least one waypoint is required",
                    ));
                }
                if !(m.speed_mps > 0.0) {
                    return Err(invalid(&field("mobility.speed_mps"), "must be > 0"));
                }
                Mobility::Linear {
                    waypoints: m.waypoints.iter().map(|w| Position::new(w[0], w[1])).collect(),
                    speed_mps: m.speed_mps,
                }
            }
        };
        stas.push(StaConfig {
            mac,
            ip,
            ssid: sta.ssid.clone(),
            profile,
            position: Position::new(sta.x, sta.y),
            tx_power_dbm: sta.tx_power_dbm,
            mobility,
        });
    }

    Ok(Scenario {
        seed,
        duration_s: raw.duration_s,
        drain_s: raw.drain_s,
        csa_count: raw.csa_count,
        remove_delay_ms: raw.remove_delay_ms,
        add_margin_ms: raw.add_margin_ms,
        guard_ms: raw.guard_ms,
        gap_mode,
        beacons,
        medium,
        control,
        policy,
        traffic,
        aps,
        stas,
    })
}

fn resolve_profile(
    name: &str,
    custom: &BTreeMap<String, RawProfile>,
) -> Option<Result<DeviceProfile, String>> {
    match name {
        "fastcard" => Some(Ok(DeviceProfile::fastcard())),
        "midcard" => Some(Ok(DeviceProfile::midcard())),
        "slowcard" => Some(Ok(DeviceProfile::slowcard())),
        other => custom.get(other).map(|p| {
            DeviceProfile::new(
                other,
                p.switch_latency_ms,
                p.beacons_required,
                p.resume_jitter_ms,
            )
            .map_err(|e| e.to_string())
        }),
    }
}
