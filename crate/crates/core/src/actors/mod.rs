//! Actors that drive the protocol state machines from delivered envelopes.

mod bank;
mod client;
mod merchant;

pub use bank::{outcome_label, BankActor};
pub use client::{ClientActor, InvoicePlan, JobResult, PaymentPlan, SmsPlan};
pub use merchant::{MerchantActor, MerchantBankActor};

use crate::netsim::{ActorId, Envelope, Network, World};

/// Every party in one run.
#[derive(Debug)]
pub struct Roster {
    pub bank: BankActor,
    pub clients: Vec<ClientActor>,
    pub merchant_bank: Option<MerchantBankActor>,
    pub merchant: Option<MerchantActor>,
}

impl Roster {
    pub fn client(&self, name: &str) -> Option<&ClientActor> {
        self.clients.iter().find(|c| c.name == name)
    }

    fn client_mut(&mut self, id: &ActorId) -> Option<&mut ClientActor> {
        self.clients.iter_mut().find(|c| match id {
            ActorId::Client(name) => &c.name == name,
            ActorId::Handset(cell) => &c.agent.config().cell_number == cell,
            _ => false,
        })
    }

    /// Funds across both banks; settlement moves money but never creates it.
    pub fn total_funds(&self) -> i64 {
        self.bank.server.total_funds() + self.merchant_bank.as_ref().map_or(0, |m| m.bank.total_funds())
    }
}

impl World for Roster {
    fn start(&mut self, net: &mut Network) {
        self.bank.start(net);
        for c in &mut self.clients {
            c.start(net);
        }
        if let Some(m) = &mut self.merchant {
            m.start(net);
        }
    }

    fn deliver(&mut self, env: &Envelope, net: &mut Network) {
        match &env.receiver {
            ActorId::Bank => self.bank.deliver(env, net),
            ActorId::MerchantBank => match &mut self.merchant_bank {
                Some(mb) => mb.deliver(env, net),
                None => net.transition(&env.receiver, "no-such-actor", env.request_id(), ""),
            },
            ActorId::Merchant => match &mut self.merchant {
                Some(m) => m.deliver(env, net),
                None => net.transition(&env.receiver, "no-such-actor", env.request_id(), ""),
            },
            id @ (ActorId::Client(_) | ActorId::Handset(_)) => match self.client_mut(id) {
                Some(c) => c.deliver(env, net),
                None => net.transition(id, "no-such-actor", env.request_id(), ""),
            },
        }
    }

    fn timer(&mut self, actor: &ActorId, tag: &str, net: &mut Network) {
        match actor {
            ActorId::Bank => self.bank.timer(tag, net),
            id @ (ActorId::Client(_) | ActorId::Handset(_)) => {
                if let Some(c) = self.client_mut(id) {
                    c.timer(tag, net);
                }
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::netsim::{run_scenario, AdversaryScript};
    use crate::scenario::{build, bundled};

    #[test]
    fn handset_and_browser_route_to_the_same_client() {
        let spec = bundled("happy-oneway").unwrap();
        let (mut roster, _) = build(&spec, 1).unwrap();
        assert!(roster.client_mut(&super::ActorId::Handset("+15550100".into())).is_some());
        assert!(roster.client_mut(&super::ActorId::Client("alice".into())).is_some());
        assert!(roster.client_mut(&super::ActorId::Client("mallory".into())).is_none());
    }

    #[test]
    fn sms_no_declines_without_moving_money() {
        let mut spec = bundled("happy-oneway").unwrap();
        spec.clients[0].payments[0].sms = super::SmsPlan::No;
        let (mut roster, _) = build(&spec, 1).unwrap();
        let before = roster.total_funds();
        run_scenario(&mut roster, &AdversaryScript::empty(), 1).unwrap();
        assert_eq!(roster.client("alice").unwrap().result("alice-pay-1"), Some("aborted:declined"));
        assert_eq!(roster.total_funds(), before);
        assert_eq!(roster.bank.server.account("ACC-0042-ALICE").unwrap().balance, 50_000);
    }

    #[test]
    fn ignored_sms_times_out() {
        let mut spec = bundled("happy-oneway").unwrap();
        spec.clients[0].payments[0].sms = super::SmsPlan::Ignore;
        spec.deadlines.sms_timeout = 20;
        let (mut roster, _) = build(&spec, 1).unwrap();
        let trace = run_scenario(&mut roster, &AdversaryScript::empty(), 1).unwrap();
        assert_eq!(roster.client("alice").unwrap().result("alice-pay-1"), Some("aborted:timeout"));
        let aborted = trace.transitions().find(|t| t.label == "aborted").unwrap();
        assert!(aborted.time > 20);
    }

    #[test]
    fn merchant_retry_after_negative_verdict() {
        let mut spec = bundled("bad-merchant-cert").unwrap();
        spec.clients[0].invoices.auth_retries = 1;
        spec.adversary.rules[0].matcher.occurrence = Some(1);
        let (mut roster, _) = build(&spec, 1).unwrap();
        run_scenario(&mut roster, &spec.adversary, 1).unwrap();
        assert_eq!(roster.client("alice").unwrap().result("INV-shop-0001"), Some("committed"));
    }
}
