#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;

use lvapsim::protocol::{ControlMessage, Relation, StaFilter};
use lvapsim::scenario::Scenario;
use lvapsim::types::{ChannelId, Ipv4Addr, Lvap, MacAddr48};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn load_scenario(name: &str) -> Scenario {
    let (scn, warnings) = Scenario::load(&scenario_path(name)).expect("scenario loads");
    assert!(warnings.is_empty(), "unexpected warnings: {warnings:?}");
    scn
}

pub fn arb_mac() -> impl Strategy<Value = MacAddr48> {
    any::<[u8; 6]>().prop_map(MacAddr48)
}

pub fn arb_channel() -> impl Strategy<Value = ChannelId> {
    (1u16..=14).prop_map(|i| ChannelId::new(i).unwrap())
}

pub fn arb_word() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,15}".prop_map(|s| s)
}

pub fn arb_finite() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |v| v.is_finite())
}

pub fn arb_lvap() -> impl Strategy<Value = Lvap> {
    (arb_mac(), arb_mac(), any::<u32>(), "[A-Za-z0-9_-]{1,32}")
        .prop_filter("distinct macs", |(sta, bssid, _, _)| sta != bssid)
        .prop_map(|(sta, bssid, ip, ssid)| {
            Lvap::new(sta, bssid, Ipv4Addr::from(ip), &ssid).unwrap()
        })
}

pub fn arb_message() -> impl Strategy<Value = ControlMessage> {
    prop_oneof![
        (
            any::<u64>(),
            prop_oneof![Just(StaFilter::Any), arb_mac().prop_map(StaFilter::Mac)],
            arb_word(),
            prop_oneof![Just(Relation::Below), Just(Relation::Above)],
            arb_finite(),
        )
            .prop_map(|(sub_id, sta_filter, metric, relation, threshold)| {
                ControlMessage::Subscribe {
                    sub_id,
                    sta_filter,
                    metric,
                    relation,
                    threshold,
                }
            }),
        (any::<u32>(), arb_mac(), arb_word(), arb_finite(), any::<u64>()).prop_map(
            |(ap_id, sta_mac, metric, value, at)| ControlMessage::Publish {
                ap_id,
                sta_mac,
                metric,
                value,
                at,
            }
        ),
        (any::<u64>(), arb_channel(), arb_mac(), any::<u32>()).prop_map(
            |(req_id, channel, sta_mac, duration_ms)| ControlMessage::ScanRequest {
                req_id,
                channel,
                sta_mac,
                duration_ms,
            }
        ),
        (any::<u64>(), any::<u32>(), proptest::option::of(arb_finite())).prop_map(
            |(req_id, ap_id, rssi_dbm)| ControlMessage::ScanResponse {
                req_id,
                ap_id,
                rssi_dbm,
            }
        ),
        (
            any::<u32>(),
            arb_mac(),
            arb_channel(),
            any::<u32>(),
            any::<u32>()
        )
            .prop_map(|(ap_id, sta_mac, new_channel, count, burst_interval_ms)| {
                ControlMessage::SendCsa {
                    ap_id,
                    sta_mac,
                    new_channel,
                    count,
                    burst_interval_ms,
                }
            }),
        (any::<u32>(), arb_lvap(), arb_channel()).prop_map(|(ap_id, lvap, channel)| {
            ControlMessage::AddLvap {
                ap_id,
                lvap,
                channel,
            }
        }),
        (any::<u32>(), arb_mac()).prop_map(|(ap_id, sta_mac)| ControlMessage::RemoveLvap {
            ap_id,
            sta_mac,
        }),
        any::<u64>().prop_map(|ref_id| ControlMessage::Ack { ref_id }),
        (any::<u64>(), arb_word()).prop_map(|(ref_id, reason)| ControlMessage::Error {
            ref_id,
            reason,
        }),
    ]
}
