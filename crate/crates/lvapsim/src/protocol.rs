//! Codec for the line-oriented southbound control protocol spoken between
//! the controller and APs. One message per LF-terminated line, fields
//! space-separated, keyword first. The decoder is strict: any line whose
//! re-encoding would differ from the input is rejected, so there is exactly
//! one spelling of every message.

use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::SimTime;
use crate::types::{ChannelId, Ipv4Addr, Lvap, MacAddr48};

/// Station filter in a subscription: a concrete MAC or the `*` wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaFilter {
    Any,
    Mac(MacAddr48),
}

/// Threshold direction for a subscription.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Below,
    Above,
}

impl Relation {
    fn token(&self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::Above => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlMessage {
    Subscribe {
        sub_id: u64,
        sta_filter: StaFilter,
        metric: String,
        relation: Relation,
        threshold: f64,
    },
    Publish {
        ap_id: u32,
        sta_mac: MacAddr48,
        metric: String,
        value: f64,
        at: SimTime,
    },
    ScanRequest {
        req_id: u64,
        channel: ChannelId,
        sta_mac: MacAddr48,
        duration_ms: u32,
    },
    ScanResponse {
        req_id: u64,
        ap_id: u32,
        rssi_dbm: Option<f64>,
    },
    SendCsa {
        ap_id: u32,
        sta_mac: MacAddr48,
        new_channel: ChannelId,
        count: u32,
        burst_interval_ms: u32,
    },
    AddLvap {
        ap_id: u32,
        lvap: Lvap,
        channel: ChannelId,
    },
    RemoveLvap {
        ap_id: u32,
        sta_mac: MacAddr48,
    },
    Ack {
        ref_id: u64,
    },
    Error {
        ref_id: u64,
        reason: String,
    },
}

impl ControlMessage {
    pub fn keyword(&self) -> &'static str {
        match self {
            ControlMessage::Subscribe { .. } => "SUBSCRIBE",
            ControlMessage::Publish { .. } => "PUBLISH",
            ControlMessage::ScanRequest { .. } => "SCAN_REQUEST",
            ControlMessage::ScanResponse { .. } => "SCAN_RESPONSE",
            ControlMessage::SendCsa { .. } => "SEND_CSA",
            ControlMessage::AddLvap { .. } => "ADD_LVAP",
            ControlMessage::RemoveLvap { .. } => "REMOVE_LVAP",
            ControlMessage::Ack { .. } => "ACK",
            ControlMessage::Error { .. } => "ERROR",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("unknown keyword {0:?}")]
    UnknownKeyword(String),
    #[error("{keyword} expects {expected} fields, got {got}")]
    FieldCount {
        keyword: String,
        expected: usize,
        got: usize,
    },
    #[error("cannot parse {field} from {token:?}")]
    FieldParse { field: &'static str, token: String },
}

fn fmt_f64(v: f64) -> String {
    debug_assert!(v.is_finite());
    format!("{v}")
}

/// Render a message as its single canonical line, including the trailing LF.
pub fn encode(msg: &ControlMessage) -> String {
    let mut s = String::new();
    match msg {
        ControlMessage::Subscribe {
            sub_id,
            sta_filter,
            metric,
            relation,
            threshold,
        } => {
            let sta = match sta_filter {
                StaFilter::Any => "*".to_string(),
                StaFilter::Mac(m) => m.to_string(),
            };
            write!(
                s,
                "SUBSCRIBE {sub_id} {sta} {metric} {} {}",
                relation.token(),
                fmt_f64(*threshold)
            )
            .unwrap();
        }
        ControlMessage::Publish {
            ap_id,
            sta_mac,
            metric,
            value,
            at,
        } => {
            write!(s, "PUBLISH {ap_id} {sta_mac} {metric} {} {at}", fmt_f64(*value)).unwrap();
        }
        ControlMessage::ScanRequest {
            req_id,
            channel,
            sta_mac,
            duration_ms,
        } => {
            write!(s, "SCAN_REQUEST {req_id} {channel} {sta_mac} {duration_ms}").unwrap();
        }
        ControlMessage::ScanResponse {
            req_id,
            ap_id,
            rssi_dbm,
        } => {
            let rssi = match rssi_dbm {
                None => "NONE".to_string(),
                Some(v) => fmt_f64(*v),
            };
            write!(s, "SCAN_RESPONSE {req_id} {ap_id} {rssi}").unwrap();
        }
        ControlMessage::SendCsa {
            ap_id,
            sta_mac,
            new_channel,
            count,
            burst_interval_ms,
        } => {
            write!(
                s,
                "SEND_CSA {ap_id} {sta_mac} {new_channel} {count} {burst_interval_ms}"
            )
            .unwrap();
        }
        ControlMessage::AddLvap {
            ap_id,
            lvap,
            channel,
        } => {
            write!(
                s,
                "ADD_LVAP {ap_id} {} {} {} {} {channel}",
                lvap.sta_mac, lvap.bssid, lvap.sta_ip, lvap.ssid
            )
            .unwrap();
        }
        ControlMessage::RemoveLvap { ap_id, sta_mac } => {
            write!(s, "REMOVE_LVAP {ap_id} {sta_mac}").unwrap();
        }
        ControlMessage::Ack { ref_id } => {
            write!(s, "ACK {ref_id}").unwrap();
        }
        ControlMessage::Error { ref_id, reason } => {
            write!(s, "ERROR {ref_id} {reason}").unwrap();
        }
    }
    s.push('\n');
    s
}

// Canonical-field parsers: each re-renders the parsed value and rejects the
// token unless it matches exactly, so "007", "+5", "1e3" and uppercase MACs
// never slip through.

fn p_u64(field: &'static str, tok: &str) -> Result<u64, CodecError> {
    let v: u64 = tok.parse().map_err(|_| CodecError::FieldParse {
        field,
        token: tok.to_string(),
    })?;
    if v.to_string() != tok {
        return Err(CodecError::FieldParse {
            field,
            token: tok.to_string(),
        });
    }
    Ok(v)
}

fn p_u32(field: &'static str, tok: &str) -> Result<u32, CodecError> {
    p_u64(field, tok).and_then(|v| {
        u32::try_from(v).map_err(|_| CodecError::FieldParse {
            field,
            token: tok.to_string(),
        })
    })
}

fn p_f64(field: &'static str, tok: &str) -> Result<f64, CodecError> {
    let err = || CodecError::FieldParse {
        field,
        token: tok.to_string(),
    };
    let v: f64 = tok.parse().map_err(|_| err())?;
    if !v.is_finite() || fmt_f64(v) != tok {
        return Err(err());
    }
    Ok(v)
}

fn p_mac(field: &'static str, tok: &str) -> Result<MacAddr48, CodecError> {
    let err = || CodecError::FieldParse {
        field,
        token: tok.to_string(),
    };
    let m: MacAddr48 = tok.parse().map_err(|_| err())?;
    if m.to_string() != tok {
        return Err(err());
    }
    Ok(m)
}

fn p_channel(field: &'static str, tok: &str) -> Result<ChannelId, CodecError> {
    let err = || CodecError::FieldParse {
        field,
        token: tok.to_string(),
    };
    let raw: u16 = tok.parse().map_err(|_| err())?;
    if raw.to_string() != tok {
        return Err(err());
    }
    ChannelId::new(raw).map_err(|_| err())
}

fn p_ip(field: &'static str, tok: &str) -> Result<Ipv4Addr, CodecError> {
    let err = || CodecError::FieldParse {
        field,
        token: tok.to_string(),
    };
    let ip: Ipv4Addr = tok.parse().map_err(|_| err())?;
    if ip.to_string() != tok {
        return Err(err());
    }
    Ok(ip)
}

fn p_word(field: &'static str, tok: &str) -> Result<String, CodecError> {
    if tok.is_empty() {
        return Err(CodecError::FieldParse {
            field,
            token: tok.to_string(),
        });
    }
    Ok(tok.to_string())
}

/// Parse one line (with or without its trailing LF) into a message.
pub fn decode(line: &str) -> Result<ControlMessage, CodecError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let toks: Vec<&str> = line.split(' ').collect();
    let keyword = toks[0];
    let expect = |n: usize| -> Result<(), CodecError> {
        if toks.len() != n {
            Err(CodecError::FieldCount {
                keyword: keyword.to_string(),
                expected: n,
                got: toks.len(),
            })
        } else {
            Ok(())
        }
    };
    // Reject empty tokens from doubled or trailing separators up front.
    if let Some(bad) = toks.iter().skip(1).find(|t| t.is_empty()) {
        return Err(CodecError::FieldParse {
            field: "token",
            token: bad.to_string(),
        });
    }
    let msg = match keyword {
        "SUBSCRIBE" => {
            expect(6)?;
            let sta_filter = if toks[2] == "*" {
                StaFilter::Any
            } else {
                StaFilter::Mac(p_mac("sta", toks[2])?)
            };
            let relation = match toks[4] {
                "<" => Relation::Below,
                ">" => Relation::Above,
                other => {
                    return Err(CodecError::FieldParse {
                        field: "rel",
                        token: other.to_string(),
                    })
                }
            };
            ControlMessage::Subscribe {
                sub_id: p_u64("sub_id", toks[1])?,
                sta_filter,
                metric: p_word("metric", toks[3])?,
                relation,
                threshold: p_f64("threshold", toks[5])?,
            }
        }
        "PUBLISH" => {
            expect(6)?;
            ControlMessage::Publish {
                ap_id: p_u32("ap_id", toks[1])?,
                sta_mac: p_mac("sta", toks[2])?,
                metric: p_word("metric", toks[3])?,
                value: p_f64("value", toks[4])?,
                at: p_u64("time_us", toks[5])?,
            }
        }
        "SCAN_REQUEST" => {
            expect(5)?;
            let duration_ms = p_u32("duration_ms", toks[4])?;
            if duration_ms == 0 {
                return Err(CodecError::FieldParse {
                    field: "duration_ms",
                    token: toks[4].to_string(),
                });
            }
            ControlMessage::ScanRequest {
                req_id: p_u64("req_id", toks[1])?,
                channel: p_channel("channel", toks[2])?,
                sta_mac: p_mac("sta", toks[3])?,
                duration_ms,
            }
        }
        "SCAN_RESPONSE" => {
            expect(4)?;
            let rssi_dbm = if toks[3] == "NONE" {
                None
            } else {
                Some(p_f64("rssi", toks[3])?)
            };
            ControlMessage::ScanResponse {
                req_id: p_u64("req_id", toks[1])?,
                ap_id: p_u32("ap_id", toks[2])?,
                rssi_dbm,
            }
        }
        "SEND_CSA" => {
            expect(6)?;
            let count = p_u32("count", toks[4])?;
            if count == 0 {
                return Err(CodecError::FieldParse {
                    field: "count",
                    token: toks[4].to_string(),
                });
            }
            ControlMessage::SendCsa {
                ap_id: p_u32("ap_id", toks[1])?,
                sta_mac: p_mac("sta", toks[2])?,
                new_channel: p_channel("new_channel", toks[3])?,
                count,
                burst_interval_ms: p_u32("burst_interval_ms", toks[5])?,
            }
        }
        "ADD_LVAP" => {
            expect(7)?;
            let lvap = Lvap::new(
                p_mac("sta", toks[2])?,
                p_mac("bssid", toks[3])?,
                p_ip("ip", toks[4])?,
                &p_word("ssid", toks[5])?,
            )
            .map_err(|_| CodecError::FieldParse {
                field: "ssid",
                token: toks[5].to_string(),
            })?;
            ControlMessage::AddLvap {
                ap_id: p_u32("ap_id", toks[1])?,
                lvap,
                channel: p_channel("channel", toks[6])?,
            }
        }
        "REMOVE_LVAP" => {
            expect(3)?;
            ControlMessage::RemoveLvap {
                ap_id: p_u32("ap_id", toks[1])?,
                sta_mac: p_mac("sta", toks[2])?,
            }
        }
        "ACK" => {
            expect(2)?;
            ControlMessage::Ack {
                ref_id: p_u64("ref_id", toks[1])?,
            }
        }
        "ERROR" => {
            expect(3)?;
            ControlMessage::Error {
                ref_id: p_u64("ref_id", toks[1])?,
                reason: p_word("reason", toks[2])?,
            }
        }
        other => return Err(CodecError::UnknownKeyword(other.to_string())),
    };
    Ok(msg)
}
