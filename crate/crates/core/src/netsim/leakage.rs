//! White-box secret scanning over traces.

use serde::Serialize;

use super::envelope::{ChannelAssumption, Envelope};
use super::trace::{ProtocolTrace, TraceEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecretKind {
    Tic,
    Pin,
    SecretKey,
    AccountNumber,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Secret {
    /// A label safe to print, never the value itself.
    pub id: String,
    pub kind: SecretKind,
    pub bytes: Vec<u8>,
}

impl Secret {
    pub fn new(id: impl Into<String>, kind: SecretKind, bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            id: id.into(),
            kind,
            bytes: bytes.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Location {
    Delivered { seq: u64 },
    /// Seen by the adversary but never delivered (dropped).
    Intercepted { ordinal: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub location: Location,
    pub secret_id: String,
    pub kind: SecretKind,
    pub offset: usize,
    pub msg_type: &'static str,
    pub assumption: ChannelAssumption,
}

fn find_all(haystack: &[u8], needle: &[u8]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return vec![];
    }
    haystack
        .windows(needle.len())
        .enumerate()
        .filter(|(_, w)| *w == needle)
        .map(|(i, _)| i)
        .collect()
}

fn scan_envelope(env: &Envelope, location: Location, secrets: &[Secret], out: &mut Vec<Finding>) {
    let bytes = env.to_bytes();
    for s in secrets {
        for offset in find_all(&bytes, &s.bytes) {
            out.push(Finding {
                location,
                secret_id: s.id.clone(),
                kind: s.kind,
                offset,
                msg_type: env.header.msg_type.as_str(),
                assumption: env.channel.assumption(),
            });
        }
    }
}

/// Every place a secret appears verbatim in a serialized envelope: all
/// deliveries, plus envelopes the adversary dropped.
pub fn leakage_scan(trace: &ProtocolTrace, secrets: &[Secret]) -> Vec<Finding> {
    let mut out = Vec::new();
    for e in &trace.events {
        match e {
            TraceEvent::Delivered(d) => {
                scan_envelope(&d.envelope, Location::Delivered { seq: d.seq }, secrets, &mut out)
            }
            TraceEvent::Intercepted(i) if i.action == "drop" => scan_envelope(
                &i.observed,
                Location::Intercepted { ordinal: i.ordinal },
                secrets,
                &mut out,
            ),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn find_all_overlapping() {
        assert_eq!(find_all(b"aaaa", b"aa"), vec![0, 1, 2]);
        assert!(find_all(b"abc", b"").is_empty());
        assert!(find_all(b"ab", b"abc").is_empty());
    }

    #[test]
    fn empty_trace_has_no_findings() {
        let secrets = [Secret::new("pin", SecretKind::Pin, vec![1, 2, 3])];
        assert!(leakage_scan(&ProtocolTrace::new(0), &secrets).is_empty());
    }
}
