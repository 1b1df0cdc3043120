//! Run traces and their line-oriented export.
//!
//! Each exported line is one JSON object with `"v": 1` and a `"kind"` of
//! `delivered`, `transition`, `intercepted` or `timer`. Delivered records carry
//! a SHA-256 digest of the body and only the non-secret body fields.

use serde::Serialize;
use serde_json::{json, Value};

use super::adversary::Origin;
use super::envelope::{ActorId, ChannelAssumption, Envelope};
use crate::digest::sha256;
use crate::messages::public_fields;
use crate::SimTime;

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    /// Position in delivery order, starting at 1.
    pub seq: u64,
    pub time: SimTime,
    /// Emission order; sends, transitions and timers share one counter.
    pub ordinal: u64,
    pub envelope: Envelope,
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub ordinal: u64,
    pub time: SimTime,
    pub actor: ActorId,
    pub label: String,
    pub request_id: Option<String>,
    pub detail: String,
    /// The delivery being handled when this transition happened.
    pub cause_seq: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interception {
    pub ordinal: u64,
    pub time: SimTime,
    pub rule: usize,
    pub action: &'static str,
    pub assumption: ChannelAssumption,
    /// The envelope as the adversary saw it, before any change.
    pub observed: Envelope,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimerFired {
    pub ordinal: u64,
    pub time: SimTime,
    pub actor: ActorId,
    pub tag: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    Delivered(Delivery),
    Transition(Transition),
    Intercepted(Interception),
    Timer(TimerFired),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProtocolTrace {
    pub seed: u64,
    pub events: Vec<TraceEvent>,
}

impl ProtocolTrace {
    pub fn new(seed: u64) -> Self {
        Self { seed, events: vec![] }
    }

    pub fn deliveries(&self) -> impl Iterator<Item = &Delivery> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Delivered(d) => Some(d),
            _ => None,
        })
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Transition(t) => Some(t),
            _ => None,
        })
    }

    pub fn interceptions(&self) -> impl Iterator<Item = &Interception> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Intercepted(i) => Some(i),
            _ => None,
        })
    }

    pub fn delivery(&self, seq: u64) -> Option<&Delivery> {
        self.deliveries().find(|d| d.seq == seq)
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.deliveries().map(|d| d.seq).max()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Transitions recorded while handling delivery `seq`.
    pub fn caused_by(&self, seq: u64) -> impl Iterator<Item = &Transition> {
        self.transitions().filter(move |t| t.cause_seq == Some(seq))
    }

    pub fn to_records(&self) -> Vec<Value> {
        self.events.iter().map(record).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.to_records() {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    /// SHA-256 over the export plus every raw envelope; equal fingerprints
    /// mean byte-identical runs.
    pub fn fingerprint(&self) -> String {
        let jsonl = self.to_jsonl();
        let raw: Vec<Vec<u8>> = self
            .events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Delivered(d) => Some(d.envelope.to_bytes()),
                TraceEvent::Intercepted(i) => Some(i.observed.to_bytes()),
                _ => None,
            })
            .collect();
        let mut parts: Vec<&[u8]> = vec![jsonl.as_bytes()];
        parts.extend(raw.iter().map(Vec::as_slice));
        hex::encode(sha256(&parts))
    }
}

fn envelope_fields(env: &Envelope) -> Value {
    json!({
        "channel": env.channel.as_str(),
        "sender": env.sender.to_string(),
        "receiver": env.receiver.to_string(),
        "msg_type": env.header.msg_type.as_str(),
        "cookie": env.header.cookie,
        "request_id": env.header.request_id,
        "body_len": env.body.len(),
        "body_digest": hex::encode(sha256(&[&env.body])),
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

fn record(e: &TraceEvent) -> Value {
    match e {
        TraceEvent::Delivered(d) => merge(
            json!({
                "v": TRACE_FORMAT_VERSION,
                "kind": "delivered",
                "seq": d.seq,
                "time": d.time,
                "ordinal": d.ordinal,
                "origin": d.origin,
                "fields": public_fields(d.envelope.header.msg_type, &d.envelope.body),
            }),
            envelope_fields(&d.envelope),
        ),
        TraceEvent::Transition(t) => json!({
            "v": TRACE_FORMAT_VERSION,
            "kind": "transition",
            "ordinal": t.ordinal,
            "time": t.time,
            "actor": t.actor.to_string(),
            "label": t.label,
            "request_id": t.request_id,
            "detail": t.detail,
            "cause_seq": t.cause_seq,
        }),
        TraceEvent::Intercepted(i) => merge(
            json!({
                "v": TRACE_FORMAT_VERSION,
                "kind": "intercepted",
                "ordinal": i.ordinal,
                "time": i.time,
                "rule": i.rule,
                "action": i.action,
                "assumption": i.assumption,
            }),
            envelope_fields(&i.observed),
        ),
        TraceEvent::Timer(t) => json!({
            "v": TRACE_FORMAT_VERSION,
            "kind": "timer",
            "ordinal": t.ordinal,
            "time": t.time,
            "actor": t.actor.to_string(),
            "tag": t.tag,
        }),
    }
}

/// A serializable summary line for reports.
#[derive(Clone, Debug, Serialize)]
pub struct DeliverySummary {
    pub seq: u64,
    pub msg_type: &'static str,
    pub sender: String,
    pub receiver: String,
}

impl From<&Delivery> for DeliverySummary {
    fn from(d: &Delivery) -> Self {
        Self {
            seq: d.seq,
            msg_type: d.envelope.header.msg_type.as_str(),
            sender: d.envelope.sender.to_string(),
            receiver: d.envelope.receiver.to_string(),
        }
    }
}
