use std::collections::BTreeSet;

use proptest::prelude::*;

use ticpay::actors::SmsPlan;
use ticpay::auth_server::Phase;
use ticpay::messages::MsgType;
use ticpay::netsim::{Action, BitFlip, BytePos, Envelope, Match, Rule, TraceEvent};
use ticpay::order::PaymentMode;
use ticpay::scenario::{bundled, run_with, PaymentSpec, RunOptions, RunOutput, ScenarioSpec};

fn sms_plan() -> impl Strategy<Value = SmsPlan> {
    prop_oneof![Just(SmsPlan::Yes), Just(SmsPlan::No), Just(SmsPlan::Ignore)]
}

fn payments() -> impl Strategy<Value = Vec<PaymentSpec>> {
    prop::collection::vec(
        (1u64..20_000, sms_plan(), 0u64..40, any::<bool>()).prop_map(|(amount, sms, reply_delay, known)| {
            PaymentSpec {
                payee: if known { "ACC-0917-BOB".into() } else { "EXT-7781-CAROL".into() },
                amount,
                mode: PaymentMode::ElectronicTransfer,
                sms,
                reply_delay,
            }
        }),
        1..4,
    )
}

fn oneway(p: Vec<PaymentSpec>, timeout: u64, batch: usize) -> ScenarioSpec {
    let mut spec = bundled("happy-oneway").unwrap();
    spec.clients[0].payments = p;
    spec.clients[0].tic_batch = batch;
    spec.deadlines.sms_timeout = timeout;
    spec.expect.outcomes.clear();
    spec
}

fn go(spec: &ScenarioSpec, seed: u64) -> RunOutput {
    run_with(spec, &RunOptions { seed: Some(seed), checks: None }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identical_inputs_give_identical_traces(p in payments(), seed in any::<u64>()) {
        let spec = oneway(p, 30, 3);
        let a = go(&spec, seed);
        let b = go(&spec, seed);
        prop_assert_eq!(a.trace.to_jsonl(), b.trace.to_jsonl());
        prop_assert_eq!(a.trace.fingerprint(), b.trace.fingerprint());
    }

    #[test]
    fn funds_are_conserved(p in payments(), timeout in 5u64..60, batch in 1usize..4, seed in any::<u64>()) {
        let out = go(&oneway(p, timeout, batch), seed);
        prop_assert_eq!(out.report.total_funds_before, out.report.total_funds_after);
    }

    #[test]
    fn every_request_terminates(p in payments(), timeout in 5u64..60, batch in 1usize..4, seed in any::<u64>()) {
        let n = p.len();
        let out = go(&oneway(p, timeout, batch), seed);
        prop_assert_eq!(out.report.outcomes.len(), n);
    }

    #[test]
    fn session_phases_only_move_forward(p in payments(), seed in any::<u64>()) {
        let out = go(&oneway(p, 30, 2), seed);
        for s in out.roster.bank.server.sessions() {
            let ranks: Vec<u8> = s.history.iter().map(|p| p.rank()).collect();
            for w in ranks.windows(2) {
                prop_assert!(w[1] == w[0] + 1 || w[1] == Phase::Closed.rank(), "{:?}", s.history);
            }
            prop_assert_eq!(ranks[0], 0);
        }
    }

    #[test]
    fn rejection_bodies_do_not_reveal_the_cause(byte in 0usize..140, bit in 0u8..8, seed in any::<u64>()) {
        let mut spec = oneway(vec![PaymentSpec {
            payee: "ACC-0917-BOB".into(),
            amount: 10,
            mode: PaymentMode::ElectronicTransfer,
            sms: SmsPlan::Yes,
            reply_delay: 1,
        }], 30, 1);
        spec.adversary.rules = vec![Rule {
            matcher: Match { msg_type: Some(MsgType::SubmitPayment), ..Match::default() },
            action: Action::Tamper { flips: vec![BitFlip { pos: BytePos::FromStart(byte), mask: 1 << bit }] },
        }];
        let out = go(&spec, seed);
        // a replay is rejected for a different internal cause
        let replay = go(&bundled("replay-attack").unwrap(), seed);
        let bodies: BTreeSet<Vec<u8>> = out.trace.deliveries().chain(replay.trace.deliveries())
            .filter(|d| d.envelope.msg_type() == MsgType::PaymentRejected)
            .map(|d| d.envelope.body.clone())
            .collect();
        prop_assert_eq!(bodies.len(), 1, "{} distinct rejection bodies", bodies.len());
    }

    #[test]
    fn every_send_is_hooked_once(p in payments(), seed in any::<u64>()) {
        let mut spec = oneway(p, 30, 3);
        spec.adversary.rules = vec![Rule { matcher: Match::default(), action: Action::Observe }];
        let out = go(&spec, seed);
        let hooked = out.trace.interceptions().count();
        let delivered = out.trace.deliveries().count();
        prop_assert_eq!(hooked, delivered);
        let ordinals: BTreeSet<u64> = out.trace.interceptions().map(|i| i.ordinal).collect();
        prop_assert_eq!(ordinals.len(), hooked);
    }

    #[test]
    fn delivery_seq_is_strictly_increasing(p in payments(), seed in any::<u64>()) {
        let out = go(&oneway(p, 30, 3), seed);
        let seqs: Vec<u64> = out.trace.events.iter().filter_map(|e| match e {
            TraceEvent::Delivered(d) => Some(d.seq),
            _ => None,
        }).collect();
        prop_assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1));
        prop_assert_eq!(seqs.first().copied(), Some(1));
    }

    #[test]
    fn envelopes_round_trip_through_bytes(p in payments(), seed in any::<u64>()) {
        let out = go(&oneway(p, 30, 3), seed);
        for d in out.trace.deliveries() {
            let bytes = d.envelope.to_bytes();
            prop_assert_eq!(&Envelope::from_bytes(&bytes).unwrap(), &d.envelope);
        }
    }
}
