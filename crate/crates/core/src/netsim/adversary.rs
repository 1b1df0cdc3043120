//! Scripted network adversary.
//!
//! Every envelope passes the hook exactly once, at send time. Rules are tried
//! in order and the first whose predicate matches decides the action. Each
//! rule counts the envelopes that match its channel/type/party filters, so
//! `occurrence = 2` means "the second such envelope". Copies produced by
//! `Replay` and `Inject` are not hooked again.

use serde::{Deserialize, Serialize};

use super::envelope::{ActorId, Channel, Envelope, Header};
use crate::messages::MsgType;
use crate::SimTime;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Match {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Channel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg_type: Option<MsgType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender: Option<ActorId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<ActorId>,
    /// 1-based index among envelopes passing the filters above. `None` matches all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occurrence: Option<u32>,
}

impl Match {
    fn filters(&self, env: &Envelope) -> bool {
        self.channel.is_none_or(|c| c == env.channel)
            && self.msg_type.is_none_or(|t| t == env.header.msg_type)
            && self.sender.as_ref().is_none_or(|s| *s == env.sender)
            && self.receiver.as_ref().is_none_or(|r| *r == env.receiver)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BytePos {
    FromStart(usize),
    /// `FromEnd(1)` is the last byte.
    FromEnd(usize),
}

impl BytePos {
    pub fn resolve(self, len: usize) -> Option<usize> {
        match self {
            BytePos::FromStart(i) => (i < len).then_some(i),
            BytePos::FromEnd(i) => (i >= 1 && i <= len).then(|| len - i),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitFlip {
    pub pos: BytePos,
    pub mask: u8,
}

/// An envelope to inject, in scenario-file form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectSpec {
    pub sender: ActorId,
    pub receiver: ActorId,
    pub channel: Channel,
    pub msg_type: MsgType,
    #[serde(default)]
    pub cookie: Option<String>,
    #[serde(default)]
    pub request_id: Option<String>,
    #[serde(default)]
    pub body_hex: String,
}

impl InjectSpec {
    pub fn to_envelope(&self) -> Result<Envelope, String> {
        Ok(Envelope {
            sender: self.sender.clone(),
            receiver: self.receiver.clone(),
            channel: self.channel,
            header: Header {
                msg_type: self.msg_type,
                cookie: self.cookie.clone(),
                request_id: self.request_id.clone(),
            },
            body: hex::decode(&self.body_hex).map_err(|e| format!("body_hex: {e}"))?,
        })
    }

    pub fn from_envelope(env: &Envelope) -> Self {
        Self {
            sender: env.sender.clone(),
            receiver: env.receiver.clone(),
            channel: env.channel,
            msg_type: env.header.msg_type,
            cookie: env.header.cookie.clone(),
            request_id: env.header.request_id.clone(),
            body_hex: hex::encode(&env.body),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    /// Record only.
    Observe,
    Drop,
    /// Deliver normally, then deliver an identical copy `delay` seconds later.
    Replay { delay: SimTime },
    /// Flip bits of the body before delivery. Out-of-range positions are skipped.
    Tamper { flips: Vec<BitFlip> },
    /// Deliver normally, and also deliver `envelope` `delay` seconds later.
    Inject {
        envelope: InjectSpec,
        #[serde(default)]
        delay: SimTime,
    },
}

impl Action {
    pub fn label(&self) -> &'static str {
        match self {
            Action::Observe => "observe",
            Action::Drop => "drop",
            Action::Replay { .. } => "replay",
            Action::Tamper { .. } => "tamper",
            Action::Inject { .. } => "inject",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    #[serde(rename = "match", default)]
    pub matcher: Match,
    pub action: Action,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryScript {
    #[serde(default)]
    pub rules: Vec<Rule>,
}

impl AdversaryScript {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_rule(mut self, matcher: Match, action: Action) -> Self {
        self.rules.push(Rule { matcher, action });
        self
    }

    /// Checks that every injected envelope is well formed.
    pub fn validate(&self) -> Result<(), String> {
        for (i, rule) in self.rules.iter().enumerate() {
            if let Action::Inject { envelope, .. } = &rule.action {
                envelope.to_envelope().map_err(|e| format!("rule {i}: {e}"))?;
            }
            if rule.matcher.occurrence == Some(0) {
                return Err(format!("rule {i}: occurrence is 1-based"));
            }
        }
        Ok(())
    }
}

/// Where a delivered envelope came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Origin {
    Sent,
    Tampered { rule: usize },
    Replayed { rule: usize, of_ordinal: u64 },
    Injected { rule: usize },
}

impl Origin {
    pub fn is_adversarial(&self) -> bool {
        !matches!(self, Origin::Sent)
    }
}

/// Result of passing one envelope through the hook.
#[derive(Debug)]
pub(crate) struct Verdict {
    pub rule: Option<usize>,
    pub deliver: Option<(Envelope, Origin)>,
    pub extra: Vec<(Envelope, SimTime, usize, bool)>,
}

#[derive(Debug)]
pub(crate) struct AdversaryRuntime {
    script: AdversaryScript,
    counts: Vec<u32>,
}

impl AdversaryRuntime {
    pub fn new(script: AdversaryScript) -> Self {
        let counts = vec![0; script.rules.len()];
        Self { script, counts }
    }

    pub fn action(&self, rule: usize) -> &Action {
        &self.script.rules[rule].action
    }

    pub fn hook(&mut self, env: Envelope) -> Verdict {
        let mut chosen = None;
        for (i, rule) in self.script.rules.iter().enumerate() {
            if !rule.matcher.filters(&env) {
                continue;
            }
            self.counts[i] += 1;
            let hit = rule.matcher.occurrence.is_none_or(|n| n == self.counts[i]);
            if hit && chosen.is_none() {
                chosen = Some(i);
            }
        }
        let Some(i) = chosen else {
            return Verdict {
                rule: None,
                deliver: Some((env, Origin::Sent)),
                extra: vec![],
            };
        };
        let (deliver, extra) = match &self.script.rules[i].action {
            Action::Observe => (Some((env, Origin::Sent)), vec![]),
            Action::Drop => (None, vec![]),
            Action::Replay { delay } => {
                let copy = env.clone();
                (Some((env, Origin::Sent)), vec![(copy, *delay, i, true)])
            }
            Action::Tamper { flips } => {
                let mut env = env;
                let len = env.body.len();
                for f in flips {
                    if let Some(p) = f.pos.resolve(len) {
                        env.body[p] ^= f.mask;
                    }
                }
                (Some((env, Origin::Tampered { rule: i })), vec![])
            }
            Action::Inject { envelope, delay } => {
                let injected = envelope.to_envelope().expect("validated script");
                (Some((env, Origin::Sent)), vec![(injected, *delay, i, false)])
            }
        };
        Verdict {
            rule: Some(i),
            deliver,
            extra,
        }
    }
}
