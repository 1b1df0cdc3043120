//! The discrete-event scheduler.
//!
//! Each channel is a queue ordered by `(deliver_at, ordinal)`, so envelopes on
//! one channel arrive in send order. When several channels have an envelope
//! due at the same instant, a seeded RNG picks which goes first. Timers due at
//! that instant fire after all due deliveries.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use super::adversary::{AdversaryRuntime, AdversaryScript, Origin};
use super::envelope::{ActorId, Channel, Envelope};
use super::trace::{Delivery, Interception, ProtocolTrace, TimerFired, TraceEvent, Transition};
use crate::digest::derive_seed;
use crate::messages::Message;
use crate::SimTime;

pub const DEFAULT_STEP_BUDGET: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("step budget of {budget} exhausted at t={time}; the protocol did not quiesce")]
    StepBudgetExceeded { budget: u64, time: SimTime },
    #[error("invalid adversary script: {0}")]
    BadScript(String),
}

/// The actors of a run, driven by the network.
pub trait World {
    fn start(&mut self, net: &mut Network);
    fn deliver(&mut self, env: &Envelope, net: &mut Network);
    fn timer(&mut self, actor: &ActorId, tag: &str, net: &mut Network);
}

#[derive(Debug)]
struct Queued {
    envelope: Envelope,
    origin: Origin,
}

#[derive(Debug)]
pub struct Network {
    now: SimTime,
    next_seq: u64,
    next_ordinal: u64,
    queues: BTreeMap<Channel, BTreeMap<(SimTime, u64), Queued>>,
    timers: BTreeMap<(SimTime, u64), (ActorId, String)>,
    rng: ChaCha20Rng,
    adversary: AdversaryRuntime,
    trace: ProtocolTrace,
    current_seq: Option<u64>,
}

impl Network {
    pub fn new(adversary: AdversaryScript, seed: u64) -> Result<Self, SimError> {
        adversary.validate().map_err(SimError::BadScript)?;
        Ok(Self {
            now: 0,
            next_seq: 1,
            next_ordinal: 1,
            queues: BTreeMap::new(),
            timers: BTreeMap::new(),
            rng: ChaCha20Rng::seed_from_u64(derive_seed(seed, "netsim/interleave")),
            adversary: AdversaryRuntime::new(adversary),
            trace: ProtocolTrace::new(seed),
            current_seq: None,
        })
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn trace(&self) -> &ProtocolTrace {
        &self.trace
    }

    fn ordinal(&mut self) -> u64 {
        let o = self.next_ordinal;
        self.next_ordinal += 1;
        o
    }

    fn enqueue(&mut self, envelope: Envelope, origin: Origin, ordinal: u64, delay: SimTime) {
        let at = self.now + envelope.channel.latency() + delay;
        self.queues
            .entry(envelope.channel)
            .or_default()
            .insert((at, ordinal), Queued { envelope, origin });
    }

    /// Sends through the adversary hook.
    pub fn send(&mut self, envelope: Envelope) {
        let ordinal = self.ordinal();
        let observed = envelope.clone();
        let verdict = self.adversary.hook(envelope);
        if let Some(rule) = verdict.rule {
            self.trace.events.push(TraceEvent::Intercepted(Interception {
                ordinal,
                time: self.now,
                rule,
                action: self.adversary.action(rule).label(),
                assumption: observed.channel.assumption(),
                observed,
            }));
        }
        if let Some((env, origin)) = verdict.deliver {
            self.enqueue(env, origin, ordinal, 0);
        }
        for (env, delay, rule, is_replay) in verdict.extra {
            let extra_ordinal = self.ordinal();
            let origin = if is_replay {
                Origin::Replayed {
                    rule,
                    of_ordinal: ordinal,
                }
            } else {
                Origin::Injected { rule }
            };
            self.enqueue(env, origin, extra_ordinal, delay);
        }
    }

    pub fn send_msg<M: Message>(
        &mut self,
        from: ActorId,
        to: ActorId,
        channel: Channel,
        cookie: Option<&str>,
        request_id: Option<&str>,
        msg: &M,
    ) {
        self.send(Envelope::new(from, to, channel, cookie, request_id, msg));
    }

    pub fn set_timer(&mut self, actor: ActorId, at: SimTime, tag: impl Into<String>) {
        // equal deadlines fire in the order they were set
        let key = (at.max(self.now), self.ordinal());
        self.timers.insert(key, (actor, tag.into()));
    }

    pub fn transition(
        &mut self,
        actor: &ActorId,
        label: impl Into<String>,
        request_id: Option<&str>,
        detail: impl Into<String>,
    ) {
        let ordinal = self.ordinal();
        self.trace.events.push(TraceEvent::Transition(Transition {
            ordinal,
            time: self.now,
            actor: actor.clone(),
            label: label.into(),
            request_id: request_id.map(str::to_string),
            detail: detail.into(),
            cause_seq: self.current_seq,
        }));
    }

    fn next_delivery_time(&self) -> Option<SimTime> {
        self.queues
            .values()
            .filter_map(|q| q.keys().next().map(|k| k.0))
            .min()
    }

    fn pop_delivery(&mut self, at: SimTime) -> (u64, Queued) {
        let due: Vec<Channel> = self
            .queues
            .iter()
            .filter(|(_, q)| q.keys().next().is_some_and(|k| k.0 == at))
            .map(|(c, _)| *c)
            .collect();
        let channel = if due.len() == 1 {
            due[0]
        } else {
            due[self.rng.random_range(0..due.len())]
        };
        let ((_, ordinal), q) = self
            .queues
            .get_mut(&channel)
            .expect("due channel")
            .pop_first()
            .expect("non-empty");
        (ordinal, q)
    }

    /// Runs `world` until nothing is queued or the budget is spent.
    pub fn run(mut self, world: &mut dyn World, budget: u64) -> Result<ProtocolTrace, SimError> {
        world.start(&mut self);
        let mut steps = 0u64;
        loop {
            let msg_at = self.next_delivery_time();
            let timer_at = self.timers.keys().next().map(|k| k.0);
            let deliver = match (msg_at, timer_at) {
                (None, None) => break,
                (Some(m), Some(t)) => m <= t,
                (Some(_), None) => true,
                (None, Some(_)) => false,
            };
            if steps >= budget {
                return Err(SimError::StepBudgetExceeded {
                    budget,
                    time: self.now,
                });
            }
            steps += 1;
            if deliver {
                let at = msg_at.expect("delivery due");
                self.now = at;
                let (ordinal, q) = self.pop_delivery(at);
                let seq = self.next_seq;
                self.next_seq += 1;
                self.trace.events.push(TraceEvent::Delivered(Delivery {
                    seq,
                    time: at,
                    ordinal,
                    envelope: q.envelope.clone(),
                    origin: q.origin,
                }));
                self.current_seq = Some(seq);
                world.deliver(&q.envelope, &mut self);
                self.current_seq = None;
            } else {
                let ((at, _), (actor, tag)) = self.timers.pop_first().expect("timer due");
                self.now = at;
                let ordinal = self.ordinal();
                self.trace.events.push(TraceEvent::Timer(TimerFired {
                    ordinal,
                    time: at,
                    actor: actor.clone(),
                    tag: tag.clone(),
                }));
                world.timer(&actor, &tag, &mut self);
            }
        }
        Ok(self.trace)
    }
}

/// Runs `world` under `adversary` with the given seed and the default budget.
pub fn run_scenario(world: &mut dyn World, adversary: &AdversaryScript, seed: u64) -> Result<ProtocolTrace, SimError> {
    run_with_budget(world, adversary, seed, DEFAULT_STEP_BUDGET)
}

pub fn run_with_budget(
    world: &mut dyn World,
    adversary: &AdversaryScript,
    seed: u64,
    budget: u64,
) -> Result<ProtocolTrace, SimError> {
    Network::new(adversary.clone(), seed)?.run(world, budget)
}
