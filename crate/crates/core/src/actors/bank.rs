use std::collections::BTreeMap;

use crate::auth_server::{
    AbortReason, AuthServer, FailureCause, PaymentGate, SmsDecision, TxnOutcome, TxnState, GENERIC_DENIAL,
};
use crate::digest::customer_digest;
use crate::messages::{
    LoginRejected, LoginRequest, ModeRejected, MsgType, PaymentRejected, SelectMode, SessionKeyMsg, SmsConfirmRequest,
    SmsReply, SubmitPayment, TicDemand, TransactionOutcome, Welcome,
};
use crate::netsim::{ActorId, Channel, Envelope, Network};
use crate::two_way::{
    AckVerdict, CustomerReceipt, MerchantAuthAck, MerchantAuthRequest, MerchantVerdictMsg, MerchantVerifications,
    NegativeReason, SettlementNotice, VerifyState,
};
use crate::SimTime;

const SMS_DEADLINE: &str = "sms-deadline";
const VERIFY_DEADLINE: &str = "verify-deadline";

#[derive(Clone, Debug, PartialEq, Eq)]
struct Route {
    request_id: String,
    client: ActorId,
}

/// Rendering of a final transaction state on the wire.
pub fn outcome_label(state: TxnState) -> String {
    match state {
        TxnState::Pending => "pending".into(),
        TxnState::Committed => "committed".into(),
        TxnState::Aborted(AbortReason::Declined) => "aborted:declined".into(),
        TxnState::Aborted(AbortReason::Timeout) => "aborted:timeout".into(),
        TxnState::Aborted(AbortReason::SessionClosed) => "aborted:session-closed".into(),
    }
}

/// The customer bank: authentication server plus merchant verification.
#[derive(Debug)]
pub struct BankActor {
    pub server: AuthServer,
    pub verifications: MerchantVerifications,
    pub bank_id: String,
    pub merchant_bank_id: Option<String>,
    sessions: BTreeMap<String, Route>,
    txns: BTreeMap<String, Route>,
    verify_routes: BTreeMap<String, ActorId>,
}

impl BankActor {
    pub fn new(server: AuthServer, bank_id: impl Into<String>, merchant_verify_timeout: SimTime) -> Self {
        Self {
            server,
            verifications: MerchantVerifications::new(merchant_verify_timeout),
            bank_id: bank_id.into(),
            merchant_bank_id: None,
            sessions: BTreeMap::new(),
            txns: BTreeMap::new(),
            verify_routes: BTreeMap::new(),
        }
    }

    pub fn with_merchant_bank(mut self, id: impl Into<String>) -> Self {
        self.merchant_bank_id = Some(id.into());
        self
    }

    /// Request id a transaction belongs to.
    pub fn request_of_txn(&self, txn_id: &str) -> Option<&str> {
        self.txns.get(txn_id).map(|r| r.request_id.as_str())
    }

    /// Copies the server's audit log into the trace, tagged by request.
    fn flush(&mut self, net: &mut Network, fallback: Option<&str>) {
        for ev in self.server.drain_events() {
            let request = ev
                .session_id
                .as_ref()
                .and_then(|s| self.sessions.get(s))
                .map(|r| r.request_id.as_str())
                .or(fallback);
            net.transition(&ActorId::Bank, ev.label, request, ev.detail);
        }
    }

    pub fn start(&mut self, net: &mut Network) {
        self.flush(net, None);
    }

    pub fn deliver(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        match env.msg_type() {
            MsgType::LoginRequest => self.on_login(env, net),
            MsgType::SelectMode => self.on_select_mode(env, net),
            MsgType::SubmitPayment => self.on_submit(env, net),
            MsgType::SmsReply => self.on_sms_reply(env, net),
            MsgType::MerchantAuthRequest => self.on_merchant_auth(env, net),
            MsgType::MerchantVerdict => self.on_verdict(env, net),
            other => net.transition(&ActorId::Bank, "unexpected-message", request, other.as_str()),
        }
    }

    pub fn timer(&mut self, tag: &str, net: &mut Network) {
        match tag {
            SMS_DEADLINE => {
                for outcome in self.server.expire_pending(net.now()) {
                    self.flush(net, None);
                    self.send_outcome(&outcome, net);
                }
                self.flush(net, None);
            }
            VERIFY_DEADLINE => {
                for ack in self.verifications.expire(net.now()) {
                    net.transition(
                        &ActorId::Bank,
                        "merchant-verdict",
                        Some(&ack.request_id),
                        serde_json::to_string(&ack.verdict).expect("serializable"),
                    );
                    if let Some(client) = self.verify_routes.get(&ack.request_id).cloned() {
                        net.send_msg(ActorId::Bank, client, Channel::Web, None, Some(&ack.request_id.clone()), &ack);
                    }
                }
            }
            _ => {}
        }
    }

    fn on_login(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        let result = env
            .decode::<LoginRequest>()
            .ok()
            .map(|b| self.server.login(&b.username, &b.password, net.now()));
        match result {
            Some(Ok(resp)) => {
                self.sessions.insert(
                    resp.session_id.clone(),
                    Route {
                        request_id: request.unwrap_or_default().to_string(),
                        client: env.sender.clone(),
                    },
                );
                self.flush(net, request);
                let cookie = Some(resp.cookie_token.as_str());
                net.send_msg(ActorId::Bank, env.sender.clone(), Channel::Web, cookie, request, &Welcome::new(&resp.welcome));
                net.send_msg(
                    ActorId::Bank,
                    env.sender.clone(),
                    Channel::Web,
                    cookie,
                    request,
                    &SessionKeyMsg {
                        session_id: resp.session_id.clone(),
                        wrapped: resp.wrapped_secret.0.clone(),
                    },
                );
            }
            _ => {
                self.flush(net, request);
                net.send_msg(
                    ActorId::Bank,
                    env.sender.clone(),
                    Channel::Web,
                    None,
                    request,
                    &LoginRejected::new("login failed"),
                );
            }
        }
    }

    fn on_select_mode(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        let ok = match env.decode::<SelectMode>() {
            Ok(b) => self.server.select_mode(env.cookie(), b.mode).is_ok(),
            Err(_) => false,
        };
        self.flush(net, request);
        if ok {
            net.send_msg(
                ActorId::Bank,
                env.sender.clone(),
                Channel::Web,
                env.cookie(),
                request,
                &TicDemand::new("enter a TIC"),
            );
        } else {
            net.send_msg(
                ActorId::Bank,
                env.sender.clone(),
                Channel::Web,
                None,
                request,
                &ModeRejected::new("mode selection refused"),
            );
        }
    }

    fn on_submit(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        let gate = request.map_or(PaymentGate::Direct, |r| self.verifications.gate(r));
        let now = net.now();
        let result = match env.decode::<SubmitPayment>() {
            Ok(b) => self
                .server
                .submit_payment(env.cookie(), &b.enc_tic, &b.enc_order, &gate, now),
            Err(_) => Err(self.server.deny(env.cookie(), FailureCause::MalformedSubmission, now)),
        };
        self.flush(net, request);
        match result {
            Ok(sms) => {
                let route = Route {
                    request_id: request.unwrap_or_default().to_string(),
                    client: env.sender.clone(),
                };
                self.txns.insert(sms.txn_id.clone(), route);
                net.send_msg(
                    ActorId::Bank,
                    ActorId::Handset(sms.cell_number.clone()),
                    Channel::Sms,
                    None,
                    request,
                    &SmsConfirmRequest {
                        txn_id: sms.txn_id.clone(),
                        amount: sms.amount,
                        text: sms.text.clone(),
                    },
                );
                net.set_timer(ActorId::Bank, sms.deadline + 1, SMS_DEADLINE);
            }
            Err(rej) => {
                net.transition(&ActorId::Bank, "rejected", request, "authentication-failed");
                net.send_msg(
                    ActorId::Bank,
                    env.sender.clone(),
                    Channel::Web,
                    None,
                    request,
                    &PaymentRejected::new(GENERIC_DENIAL),
                );
                if let Some(outcome) = rej.aborted {
                    self.send_outcome(&outcome, net);
                }
            }
        }
    }

    fn on_sms_reply(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        let ActorId::Handset(cell) = &env.sender else {
            net.transition(&ActorId::Bank, "sms-reply-rejected", request, "not from a handset");
            return;
        };
        let Ok(reply) = env.decode::<SmsReply>() else {
            net.transition(&ActorId::Bank, "sms-reply-rejected", request, "malformed");
            return;
        };
        let Some(decision) = SmsDecision::parse(reply.decision.trim()) else {
            net.transition(&ActorId::Bank, "sms-reply-rejected", request, "unrecognised answer");
            return;
        };
        let owner = self.request_of_txn(&reply.txn_id).map(str::to_string);
        match self.server.handle_sms_reply(&reply.txn_id, decision, cell, net.now()) {
            Ok(outcome) => {
                self.flush(net, owner.as_deref());
                self.send_outcome(&outcome, net);
            }
            Err(e) => net.transition(&ActorId::Bank, "sms-reply-rejected", owner.as_deref().or(request), e.to_string()),
        }
    }

    fn send_outcome(&mut self, outcome: &TxnOutcome, net: &mut Network) {
        let Some(route) = self.txns.get(&outcome.txn_id).cloned() else {
            return;
        };
        let request = Some(route.request_id.as_str());
        net.send_msg(
            ActorId::Bank,
            route.client.clone(),
            Channel::Web,
            None,
            request,
            &TransactionOutcome {
                txn_id: outcome.txn_id.clone(),
                state: outcome_label(outcome.state),
            },
        );
        if let (TxnState::Committed, Some(terms)) = (outcome.state, &outcome.terms) {
            net.send_msg(
                ActorId::Bank,
                ActorId::MerchantBank,
                Channel::InterBank,
                None,
                request,
                &SettlementNotice {
                    invoice_number: terms.invoice_number.clone(),
                    merchant_id: terms.merchant_id.clone(),
                    customer_id: customer_digest(&outcome.account_id),
                    amount: outcome.amount,
                },
            );
            net.send_msg(
                ActorId::Bank,
                route.client,
                Channel::Web,
                None,
                request,
                &CustomerReceipt {
                    invoice_number: terms.invoice_number.clone(),
                    merchant_id: terms.merchant_id.clone(),
                    amount: outcome.amount,
                },
            );
        }
    }

    fn on_merchant_auth(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        let req = match env.decode::<MerchantAuthRequest>() {
            Ok(r) if Some(r.invoice_number.as_str()) == request => r,
            _ => {
                net.transition(&ActorId::Bank, "merchant-auth-malformed", request, "");
                return;
            }
        };
        let now = net.now();
        let verify = self.verifications.begin(&req, now);
        self.verify_routes.insert(req.invoice_number.clone(), env.sender.clone());
        net.transition(
            &ActorId::Bank,
            "merchant-verification-started",
            request,
            format!("attempt {}", verify.attempt),
        );
        if self.merchant_bank_id.as_deref() != Some(req.merchant_bank_id.as_str()) {
            let verdict = AckVerdict::Negative(NegativeReason::UnknownMerchantBank);
            let msg = MerchantVerdictMsg {
                request_id: verify.request_id,
                attempt: verify.attempt,
                verdict,
            };
            self.verifications.resolve(&msg, now);
            self.ack(&msg.request_id, verdict, net);
            return;
        }
        net.send_msg(ActorId::Bank, ActorId::MerchantBank, Channel::InterBank, None, request, &verify);
        let deadline = match self.verifications.entry(&req.invoice_number).map(|e| &e.state) {
            Some(VerifyState::Pending { deadline, .. }) => *deadline,
            _ => now,
        };
        net.set_timer(ActorId::Bank, deadline + 1, VERIFY_DEADLINE);
    }

    fn on_verdict(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        let Ok(msg) = env.decode::<MerchantVerdictMsg>() else {
            net.transition(&ActorId::Bank, "merchant-verdict-malformed", request, "");
            return;
        };
        match self.verifications.resolve(&msg, net.now()) {
            Some(verdict) => self.ack(&msg.request_id, verdict, net),
            None => net.transition(&ActorId::Bank, "stale-verdict", request, ""),
        }
    }

    fn ack(&mut self, request_id: &str, verdict: AckVerdict, net: &mut Network) {
        net.transition(
            &ActorId::Bank,
            "merchant-verdict",
            Some(request_id),
            serde_json::to_string(&verdict).expect("serializable"),
        );
        if let Some(client) = self.verify_routes.get(request_id).cloned() {
            let ack = MerchantAuthAck {
                request_id: request_id.to_string(),
                verdict,
            };
            net.send_msg(ActorId::Bank, client, Channel::Web, None, Some(request_id), &ack);
        }
    }
}
