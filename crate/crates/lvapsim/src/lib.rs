//! Discrete-event simulator of an SDN-managed enterprise WLAN in which
//! every client is served by its own light virtual access point (LVAP).
//! Handoffs move the LVAP between physical APs while the client keeps its
//! association; cross-channel moves are steered with unicast channel
//! switch announcement (CSA) countdowns so the client retunes on cue
//! instead of dropping into a full re-association.
//!
//! The crate splits into a pure event kernel ([`engine`]), a radio
//! propagation model ([`medium`]), the wire codec for the control channel
//! ([`protocol`]), per-role state machines ([`apnode`], [`stanode`],
//! [`controller`]), measurement tooling ([`metrics`]), TOML scenario
//! loading ([`scenario`]) and the [`sim::World`] that binds them together.

pub mod apnode;
pub mod controller;
pub mod engine;
pub mod medium;
pub mod metrics;
pub mod protocol;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod stanode;
pub mod types;

pub use engine::{Kernel, NodeId, RngStream, SimTime};
pub use metrics::{GapMode, GapOutcome, RunReport};
pub use runner::{run_scenario, run_sweep, Overrides, RunError};
pub use scenario::{Scenario, ScenarioError};
pub use sim::World;
pub use types::{ChannelId, DeviceProfile, Lvap, MacAddr48, Position};
