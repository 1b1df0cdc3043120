//! Step templates for the two protocol flows and the trace check against them.
//!
//! A template is a numbered list of steps; each step is a short sequence of
//! message types and actor transition labels, or a nested template. The check
//! groups a trace by request id, keeps the deliveries plus the transitions
//! whose labels the template mentions, orders them by emission ordinal, and
//! compares item by item.

use std::collections::BTreeSet;

use serde::Serialize;

use super::adversary::Origin;
use super::trace::{ProtocolTrace, TraceEvent};
use crate::messages::MsgType;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Item {
    Msg(MsgType),
    Event(&'static str),
}

impl Item {
    pub fn describe(self) -> String {
        match self {
            Item::Msg(t) => format!("message {t}"),
            Item::Event(l) => format!("transition {l}"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum StepContent {
    Items(Vec<Item>),
    Sub(Template),
}

#[derive(Clone, Debug)]
pub struct Step {
    pub number: u32,
    pub content: StepContent,
}

#[derive(Clone, Debug)]
pub struct Template {
    pub name: &'static str,
    pub steps: Vec<Step>,
}

impl Template {
    /// `(step path, item)` in order, e.g. `("6.7", Msg(SubmitPayment))`.
    pub fn flatten(&self) -> Vec<(String, Item)> {
        let mut out = Vec::new();
        for step in &self.steps {
            match &step.content {
                StepContent::Items(items) => out.extend(items.iter().map(|i| (step.number.to_string(), *i))),
                StepContent::Sub(t) => out.extend(
                    t.flatten()
                        .into_iter()
                        .map(|(p, i)| (format!("{}.{p}", step.number), i)),
                ),
            }
        }
        out
    }

    pub fn labels(&self) -> BTreeSet<&'static str> {
        self.flatten()
            .into_iter()
            .filter_map(|(_, i)| match i {
                Item::Event(l) => Some(l),
                Item::Msg(_) => None,
            })
            .collect()
    }
}

fn step(number: u32, items: Vec<Item>) -> Step {
    Step {
        number,
        content: StepContent::Items(items),
    }
}

/// The one-way flow, ten steps from login to the outcome.
pub fn one_way_template() -> Template {
    use Item::*;
    use MsgType as M;
    Template {
        name: "one-way",
        steps: vec![
            step(1, vec![Msg(M::LoginRequest)]),
            step(2, vec![Event("basic-auth-verified")]),
            step(3, vec![Msg(M::Welcome)]),
            step(4, vec![Msg(M::SessionKey), Event("session-key-unwrapped")]),
            step(5, vec![Msg(M::SelectMode), Msg(M::TicDemand)]),
            step(6, vec![Event("order-composed")]),
            step(7, vec![Event("tic-picked"), Msg(M::SubmitPayment)]),
            step(8, vec![Event("tic-verified")]),
            step(9, vec![Msg(M::SmsConfirmRequest)]),
            step(10, vec![Msg(M::SmsReply), Event("committed"), Msg(M::TransactionOutcome)]),
        ],
    }
}

/// The two-way flow; step 6 is the whole one-way flow.
pub fn two_way_template() -> Template {
    use Item::*;
    use MsgType as M;
    Template {
        name: "two-way",
        steps: vec![
            step(1, vec![Msg(M::Invoice)]),
            step(2, vec![Msg(M::MerchantAuthRequest)]),
            step(3, vec![Msg(M::MerchantVerify)]),
            step(4, vec![Msg(M::MerchantVerdict)]),
            step(5, vec![Msg(M::MerchantAuthAck)]),
            Step {
                number: 6,
                content: StepContent::Sub(one_way_template()),
            },
            step(7, vec![Msg(M::SettlementNotice), Msg(M::CustomerReceipt)]),
            step(8, vec![Msg(M::PaymentConfirmation)]),
        ],
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub request_id: Option<String>,
    /// Template step where the trace departs, e.g. `"6.7"`, or `"end"` for
    /// surplus items after the last step.
    pub step: String,
    pub expected: Option<String>,
    pub found: Option<String>,
    /// Delivery seq of the offending item, or of the nearest earlier delivery.
    pub seq: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "result")]
pub enum Conformance {
    Pass { request_ids: Vec<String> },
    Fail(Divergence),
}

impl Conformance {
    pub fn is_pass(&self) -> bool {
        matches!(self, Conformance::Pass { .. })
    }
}

struct Observed {
    key: (u64, u8),
    item: Item,
    seq: Option<u64>,
}

/// Honest deliveries sort by emission ordinal, so simultaneous arrivals on
/// different channels keep their causal order. Replayed and injected copies
/// sort where they arrive: after everything emitted before their delivery.
fn project(trace: &ProtocolTrace, request_id: &str, labels: &BTreeSet<&'static str>) -> Vec<Observed> {
    let mut out = Vec::new();
    let mut high = 0u64;
    for e in &trace.events {
        match e {
            TraceEvent::Delivered(d) => {
                if d.envelope.request_id() == Some(request_id) {
                    let key = match d.origin {
                        Origin::Replayed { .. } | Origin::Injected { .. } => (high, 1),
                        _ => (d.ordinal, 0),
                    };
                    out.push(Observed {
                        key,
                        item: Item::Msg(d.envelope.header.msg_type),
                        seq: Some(d.seq),
                    });
                }
                high = high.max(d.ordinal);
            }
            TraceEvent::Transition(t) => {
                if t.request_id.as_deref() == Some(request_id) {
                    if let Some(l) = labels.get(t.label.as_str()) {
                        out.push(Observed {
                            key: (t.ordinal, 0),
                            item: Item::Event(l),
                            seq: t.cause_seq,
                        });
                    }
                }
                high = high.max(t.ordinal);
            }
            TraceEvent::Intercepted(i) => high = high.max(i.ordinal),
            TraceEvent::Timer(t) => high = high.max(t.ordinal),
        }
    }
    out.sort_by_key(|o| o.key);
    out
}

/// Checks one request's projection against the template.
pub fn check_request(trace: &ProtocolTrace, template: &Template, request_id: &str) -> Result<(), Divergence> {
    let expected = template.flatten();
    let observed = project(trace, request_id, &template.labels());
    let mut last_seq = None;
    for (i, (path, want)) in expected.iter().enumerate() {
        match observed.get(i) {
            Some(o) if o.item == *want => last_seq = o.seq.or(last_seq),
            other => {
                return Err(Divergence {
                    request_id: Some(request_id.to_string()),
                    step: path.clone(),
                    expected: Some(want.describe()),
                    found: other.map(|o| o.item.describe()),
                    seq: other.and_then(|o| o.seq).or(last_seq),
                })
            }
        }
    }
    if let Some(extra) = observed.get(expected.len()) {
        return Err(Divergence {
            request_id: Some(request_id.to_string()),
            step: "end".into(),
            expected: None,
            found: Some(extra.item.describe()),
            seq: extra.seq.or(last_seq),
        });
    }
    Ok(())
}

/// Every request id in the trace must follow the template exactly.
pub fn conformance_check(trace: &ProtocolTrace, template: &Template) -> Conformance {
    let mut ids: Vec<String> = Vec::new();
    for d in trace.deliveries() {
        if let Some(r) = d.envelope.request_id() {
            if !ids.iter().any(|x| x == r) {
                ids.push(r.to_string());
            }
        }
    }
    if ids.is_empty() {
        let first = template.flatten().into_iter().next();
        return Conformance::Fail(Divergence {
            request_id: None,
            step: first.as_ref().map(|(p, _)| p.clone()).unwrap_or_else(|| "1".into()),
            expected: first.map(|(_, i)| i.describe()),
            found: None,
            seq: None,
        });
    }
    for id in &ids {
        if let Err(d) = check_request(trace, template, id) {
            return Conformance::Fail(d);
        }
    }
    Conformance::Pass { request_ids: ids }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_shapes() {
        let one = one_way_template();
        assert_eq!(one.steps.len(), 10);
        let two = two_way_template();
        assert_eq!(two.steps.len(), 8);
        let flat = two.flatten();
        assert_eq!(flat.len(), 5 + one.flatten().len() + 3);
        assert!(flat.iter().any(|(p, i)| p == "6.7" && *i == Item::Msg(MsgType::SubmitPayment)));
    }

    #[test]
    fn empty_trace_fails_at_step_one() {
        match conformance_check(&ProtocolTrace::new(0), &one_way_template()) {
            Conformance::Fail(d) => {
                assert_eq!(d.step, "1");
                assert_eq!(d.found, None);
            }
            other => panic!("{other:?}"),
        }
    }
}
