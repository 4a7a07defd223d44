//! Shared domain types: addresses, channels, LVAPs, AP descriptors and
//! per-device hardware profiles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use std::net::Ipv4Addr;

/// 48-bit MAC address. Canonical text form is six lowercase hex byte pairs
/// separated by colons.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddr48(pub [u8; 6]);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MacParseError {
    #[error("expected 6 colon-separated bytes, got {0}")]
    WrongLength(usize),
    #[error("invalid hex byte {0:?}")]
    InvalidByte(String),
}

impl MacAddr48 {
    pub const BROADCAST: MacAddr48 = MacAddr48([0xff; 6]);

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }

    /// Locally-administered bit (bit 1 of the first octet).
    pub fn is_locally_administered(&self) -> bool {
        self.0[0] & 0x02 != 0
    }
}

impl FromStr for MacAddr48 {
    type Err = MacParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 6 {
            return Err(MacParseError::WrongLength(parts.len()));
        }
        let mut octets = [0u8; 6];
        for (i, part) in parts.iter().enumerate() {
            if part.len() != 2 {
                return Err(MacParseError::InvalidByte(part.to_string()));
            }
            octets[i] = u8::from_str_radix(part, 16)
                .map_err(|_| MacParseError::InvalidByte(part.to_string()))?;
        }
        Ok(MacAddr48(octets))
    }
}

impl fmt::Display for MacAddr48 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = &self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl fmt::Debug for MacAddr48 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacAddr48({self})")
    }
}

impl Serialize for MacAddr48 {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr48 {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BssidError {
    #[error("station index {0} does not fit in 24 bits")]
    IndexOverflow(u64),
    #[error("base {0} must have the locally-administered bit set")]
    BaseNotLocal(MacAddr48),
}

/// Derive the per-station fake BSSID from a locally-administered base prefix:
/// the low three octets are replaced by the station index, big-endian.
/// Injective over `sta_index` for a fixed base.
pub fn allocate_bssid(sta_index: u64, base: MacAddr48) -> Result<MacAddr48, BssidError> {
    if sta_index >= 1 << 24 {
        return Err(BssidError::IndexOverflow(sta_index));
    }
    if !base.is_locally_administered() {
        return Err(BssidError::BaseNotLocal(base));
    }
    let mut octets = base.octets();
    octets[3] = (sta_index >> 16) as u8;
    octets[4] = (sta_index >> 8) as u8;
    octets[5] = sta_index as u8;
    Ok(MacAddr48(octets))
}

/// 2.4 GHz channel number, 1..=14.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ChannelId(u8);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("channel {0} outside 1..=14")]
pub struct ChannelError(pub u16);

impl ChannelId {
    pub fn new(index: u16) -> Result<Self, ChannelError> {
        if (1..=14).contains(&index) {
            Ok(ChannelId(index as u8))
        } else {
            Err(ChannelError(index))
        }
    }

    pub fn index(&self) -> u8 {
        self.0
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChannelId({})", self.0)
    }
}

impl<'de> Deserialize<'de> for ChannelId {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let v = u16::deserialize(de)?;
        ChannelId::new(v).map_err(serde::de::Error::custom)
    }
}

/// The virtual-AP tuple that travels with a station: its real MAC, the fake
/// BSSID it associates to, its IP and the SSID. The BSSID never changes for
/// the station's lifetime, so the station never re-associates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lvap {
    pub sta_mac: MacAddr48,
    pub bssid: MacAddr48,
    pub sta_ip: Ipv4Addr,
    pub ssid: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LvapError {
    #[error("bssid must differ from the station MAC")]
    BssidEqualsStaMac,
    #[error("ssid must be 1..=32 bytes without spaces, got {0:?}")]
    BadSsid(String),
}

impl Lvap {
    pub fn new(
        sta_mac: MacAddr48,
        bssid: MacAddr48,
        sta_ip: Ipv4Addr,
        ssid: &str,
    ) -> Result<Self, LvapError> {
        if bssid == sta_mac {
            return Err(LvapError::BssidEqualsStaMac);
        }
        if ssid.is_empty() || ssid.len() > 32 || ssid.contains(char::is_whitespace) {
            return Err(LvapError::BadSsid(ssid.to_string()));
        }
        Ok(Lvap {
            sta_mac,
            bssid,
            sta_ip,
            ssid: ssid.to_string(),
        })
    }
}

/// 2-D position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite());
        Position { x, y }
    }

    /// Euclidean distance in meters.
    pub fn distance_to(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// State of an AP's extra monitoring interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxState {
    Idle,
    Scanning {
        channel: ChannelId,
        until_us: u64,
    },
}

/// Static identity of a physical AP. `primary_channel` never changes at
/// runtime; only the auxiliary interface retunes during scans.
#[derive(Debug, Clone)]
pub struct ApDescriptor {
    pub ap_id: u32,
    pub position: Position,
    pub primary_channel: ChannelId,
    pub tx_power_dbm: f64,
}

/// Per-client-hardware model of channel-switch behavior: how long the radio
/// is deaf while retuning and how many beacons it needs to hear on the new
/// channel before it resumes transmitting.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub name: String,
    pub switch_latency_ms: f64,
    pub beacons_required: u32,
    pub resume_jitter_ms: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("profile field {field} must be non-negative, got {value}")]
pub struct ProfileError {
    pub field: &'static str,
    pub value: f64,
}

impl DeviceProfile {
    pub fn new(
        name: &str,
        switch_latency_ms: f64,
        beacons_required: u32,
        resume_jitter_ms: f64,
    ) -> Result<Self, ProfileError> {
        for (field, value) in [
            ("switch_latency_ms", switch_latency_ms),
            ("resume_jitter_ms", resume_jitter_ms),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(ProfileError { field, value });
            }
        }
        Ok(DeviceProfile {
            name: name.to_string(),
            switch_latency_ms,
            beacons_required,
            resume_jitter_ms,
        })
    }

    /// A fast card: short deafness, resumes after a single beacon.
    pub fn fastcard() -> Self {
        DeviceProfile::new("fastcard", 5.0, 1, 0.0).unwrap()
    }

    /// A middling card.
    pub fn midcard() -> Self {
        DeviceProfile::new("midcard", 15.0, 2, 0.0).unwrap()
    }

    /// A slow card that loses packets on every handoff.
    pub fn slowcard() -> Self {
        DeviceProfile::new("slowcard", 50.0, 3, 0.0).unwrap()
    }
}

/// Dual-rate beacon configuration: a low-frequency interval for steady state
/// and a high-frequency one used for the burst around a handoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconPolicy {
    pub interval_normal_ms: f64,
    pub interval_burst_ms: f64,
    pub burst_count: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeaconPolicyError {
    #[error("interval_normal_ms must be in [50,100], got {0}")]
    NormalOutOfRange(f64),
    #[error("interval_burst_ms must be in (0, interval_normal_ms], got {0}")]
    BurstOutOfRange(f64),
    #[error("burst_count must be >= 1")]
    ZeroBurstCount,
}

impl BeaconPolicy {
    pub fn new(
        interval_normal_ms: f64,
        interval_burst_ms: f64,
        burst_count: u32,
    ) -> Result<Self, BeaconPolicyError> {
        if !(50.0..=100.0).contains(&interval_normal_ms) {
            return Err(BeaconPolicyError::NormalOutOfRange(interval_normal_ms));
        }
        if !(interval_burst_ms > 0.0 && interval_burst_ms <= interval_normal_ms) {
            return Err(BeaconPolicyError::BurstOutOfRange(interval_burst_ms));
        }
        if burst_count == 0 {
            return Err(BeaconPolicyError::ZeroBurstCount);
        }
        Ok(BeaconPolicy {
            interval_normal_ms,
            interval_burst_ms,
            burst_count,
        })
    }
}

impl Default for BeaconPolicy {
    fn default() -> Self {
        BeaconPolicy::new(100.0, 10.0, 20).unwrap()
    }
}
