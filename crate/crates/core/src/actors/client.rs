use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::auth_server::{LoginResponse, SmsDecision};
use crate::client_agent::{ClientAgent, ClientError, SmsAnswer, SmsPrompt, VaultError};
use crate::crypto::WrappedKey;
use crate::messages::{
    InvoiceMsg, LoginRequest, MsgType, SelectMode, SessionKeyMsg, SmsConfirmRequest, SmsReply, SubmitPayment,
    TransactionOutcome,
};
use crate::netsim::{ActorId, Channel, Envelope, Network};
use crate::order::{PaymentMode, PaymentOrder};
use crate::two_way::{
    merchant_payee_ref, request_merchant_auth, AckVerdict, CustomerReceipt, InvoiceBundle, MerchantAuthAck,
};
use crate::SimTime;

/// How the customer answers the confirmation SMS.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmsPlan {
    #[default]
    Yes,
    No,
    /// Never answer; the bank times the transaction out.
    Ignore,
}

impl SmsPlan {
    fn decision(self) -> Option<SmsDecision> {
        match self {
            SmsPlan::Yes => Some(SmsDecision::Yes),
            SmsPlan::No => Some(SmsDecision::No),
            SmsPlan::Ignore => None,
        }
    }
}

/// One direct payment the client makes, in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaymentPlan {
    pub payee: String,
    pub amount: u64,
    pub mode: PaymentMode,
    pub sms: SmsPlan,
    pub reply_delay: SimTime,
}

/// How the client handles every invoice it receives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvoicePlan {
    pub mode: PaymentMode,
    pub sms: SmsPlan,
    pub reply_delay: SimTime,
    /// Fresh merchant checks allowed after a negative verdict.
    pub auth_retries: u32,
}

impl Default for InvoicePlan {
    fn default() -> Self {
        Self {
            mode: PaymentMode::CreditCard,
            sms: SmsPlan::Yes,
            reply_delay: 1,
            auth_retries: 0,
        }
    }
}

#[derive(Clone, Debug)]
enum Job {
    Pay(PaymentPlan),
    Invoice { bundle: InvoiceBundle, retries_left: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    AwaitingAck,
    LoggingIn,
    AwaitingOutcome,
}

#[derive(Clone, Debug)]
struct Active {
    request_id: String,
    job: Job,
    stage: Stage,
}

impl Active {
    fn order(&self) -> PaymentOrder {
        match &self.job {
            Job::Pay(p) => PaymentOrder {
                mode: p.mode,
                payee_account: p.payee.clone(),
                amount: p.amount,
                invoice_number: None,
                branch_code: None,
            },
            Job::Invoice { bundle, .. } => PaymentOrder {
                mode: PaymentMode::CreditCard,
                payee_account: merchant_payee_ref(&bundle.certificate.account_ref),
                amount: bundle.amount,
                invoice_number: Some(bundle.invoice_number.clone()),
                branch_code: None,
            },
        }
    }
}

/// Final result of one client request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct JobResult {
    pub request_id: String,
    /// `committed`, `aborted:<reason>`, `rejected`, `login-failed`,
    /// `key-unwrap-failed`, `vault-empty`, `mode-rejected` or
    /// `merchant-rejected:<reason>`.
    pub outcome: String,
}

/// A customer: browser session and handset, driving a [`ClientAgent`].
#[derive(Debug)]
pub struct ClientActor {
    pub name: String,
    pub agent: ClientAgent,
    invoice_plan: InvoicePlan,
    jobs: VecDeque<Job>,
    active: Option<Active>,
    next_request: u32,
    queued_replies: BTreeMap<String, SmsAnswer>,
    pub results: Vec<JobResult>,
    pub receipts: Vec<CustomerReceipt>,
}

impl ClientActor {
    pub fn new(name: impl Into<String>, agent: ClientAgent, payments: Vec<PaymentPlan>, invoice_plan: InvoicePlan) -> Self {
        Self {
            name: name.into(),
            agent,
            invoice_plan,
            jobs: payments.into_iter().map(Job::Pay).collect(),
            active: None,
            next_request: 1,
            queued_replies: BTreeMap::new(),
            results: Vec::new(),
            receipts: Vec::new(),
        }
    }

    pub fn id(&self) -> ActorId {
        ActorId::Client(self.name.clone())
    }

    pub fn handset(&self) -> ActorId {
        ActorId::Handset(self.agent.config().cell_number.clone())
    }

    pub fn result(&self, request_id: &str) -> Option<&str> {
        self.results
            .iter()
            .find(|r| r.request_id == request_id)
            .map(|r| r.outcome.as_str())
    }

    fn emit(&self, net: &mut Network, label: &str, request: Option<&str>, detail: impl Into<String>) {
        net.transition(&self.id(), label, request, detail);
    }

    pub fn start(&mut self, net: &mut Network) {
        let detail = format!("{} codes", self.agent.vault().len());
        self.emit(net, "vault-provisioned", None, detail);
        self.begin_next(net);
    }

    fn begin_next(&mut self, net: &mut Network) {
        if self.active.is_some() {
            return;
        }
        let Some(job) = self.jobs.pop_front() else {
            return;
        };
        match &job {
            Job::Pay(_) => {
                let request_id = format!("{}-pay-{}", self.name, self.next_request);
                self.next_request += 1;
                self.active = Some(Active {
                    request_id,
                    job,
                    stage: Stage::LoggingIn,
                });
                self.login(net);
            }
            Job::Invoice { bundle, .. } => {
                let request_id = bundle.invoice_number.clone();
                match request_merchant_auth(bundle) {
                    Ok(req) => {
                        net.send_msg(self.id(), ActorId::Bank, Channel::Web, None, Some(&request_id), &req);
                        self.active = Some(Active {
                            request_id,
                            job,
                            stage: Stage::AwaitingAck,
                        });
                    }
                    Err(e) => {
                        self.results.push(JobResult {
                            request_id,
                            outcome: format!("bundle-rejected:{e}"),
                        });
                        self.begin_next(net);
                    }
                }
            }
        }
    }

    fn login(&mut self, net: &mut Network) {
        let Some(active) = self.active.as_mut() else { return };
        active.stage = Stage::LoggingIn;
        let request = active.request_id.clone();
        let cfg = self.agent.config();
        let body = LoginRequest {
            username: cfg.username.clone(),
            password: cfg.password.clone(),
        };
        net.send_msg(self.id(), ActorId::Bank, Channel::Web, None, Some(&request), &body);
    }

    fn finish(&mut self, outcome: impl Into<String>, net: &mut Network) {
        if let Some(active) = self.active.take() {
            self.results.push(JobResult {
                request_id: active.request_id,
                outcome: outcome.into(),
            });
        }
        self.agent.end_session();
        self.begin_next(net);
    }

    /// The active request, if `env` belongs to it.
    fn active_for(&self, env: &Envelope) -> Option<&Active> {
        self.active
            .as_ref()
            .filter(|a| env.request_id() == Some(a.request_id.as_str()))
    }

    pub fn deliver(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        let t = env.msg_type();
        let expected_sender = match t {
            MsgType::Invoice => ActorId::Merchant,
            _ => ActorId::Bank,
        };
        if env.sender != expected_sender {
            self.emit(net, "ignored", request, format!("{t} from {}", env.sender));
            return;
        }
        if t == MsgType::SmsConfirmRequest {
            return self.on_sms(env, net);
        }
        if t == MsgType::Invoice {
            return self.on_invoice(env, net);
        }
        if t == MsgType::CustomerReceipt {
            if let Ok(r) = env.decode::<CustomerReceipt>() {
                self.emit(net, "receipt", request, r.invoice_number.clone());
                self.receipts.push(r);
            }
            return;
        }
        let Some(stage) = self.active_for(env).map(|a| a.stage) else {
            self.emit(net, "stale-message", request, t.as_str());
            return;
        };
        match (t, stage) {
            (MsgType::MerchantAuthAck, Stage::AwaitingAck) => self.on_ack(env, net),
            (MsgType::LoginRejected, Stage::LoggingIn) => self.finish("login-failed", net),
            (MsgType::Welcome, Stage::LoggingIn) => {}
            (MsgType::SessionKey, Stage::LoggingIn) => self.on_session_key(env, net),
            (MsgType::ModeRejected, Stage::LoggingIn) => self.finish("mode-rejected", net),
            (MsgType::TicDemand, Stage::LoggingIn) => self.on_tic_demand(env, net),
            (MsgType::PaymentRejected, _) => {
                self.emit(net, "payment-rejected", request, "");
                self.finish("rejected", net);
            }
            (MsgType::TransactionOutcome, _) => match env.decode::<TransactionOutcome>() {
                Ok(o) => {
                    self.emit(net, "outcome", request, o.state.clone());
                    self.finish(o.state, net);
                }
                Err(_) => self.emit(net, "stale-message", request, "malformed outcome"),
            },
            _ => self.emit(net, "stale-message", request, t.as_str()),
        }
    }

    fn on_invoice(&mut self, env: &Envelope, net: &mut Network) {
        let Ok(inv) = env.decode::<InvoiceMsg>() else {
            self.emit(net, "invoice-malformed", env.request_id(), "");
            return;
        };
        let bundle = InvoiceBundle {
            invoice_number: inv.invoice_number,
            amount: inv.amount,
            enc_banking_info: inv.enc_banking_info,
            certificate: inv.certificate,
        };
        self.jobs.push_back(Job::Invoice {
            bundle,
            retries_left: self.invoice_plan.auth_retries,
        });
        self.begin_next(net);
    }

    fn on_ack(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        let Ok(ack) = env.decode::<MerchantAuthAck>() else {
            self.emit(net, "stale-message", request, "malformed ack");
            return;
        };
        match ack.verdict {
            AckVerdict::Positive => {
                self.emit(net, "merchant-verified", request, "");
                self.login(net);
            }
            AckVerdict::Negative(reason) => {
                let reason = serde_json::to_value(reason).expect("serializable");
                let reason = reason.as_str().unwrap_or_default().to_string();
                self.emit(net, "merchant-rejected", request, reason.clone());
                let active = self.active.as_mut().expect("active checked");
                if let Job::Invoice { bundle, retries_left } = &mut active.job {
                    if *retries_left > 0 {
                        *retries_left -= 1;
                        if let Ok(req) = request_merchant_auth(bundle) {
                            let rid = active.request_id.clone();
                            net.send_msg(self.id(), ActorId::Bank, Channel::Web, None, Some(&rid), &req);
                            return;
                        }
                    }
                }
                self.finish(format!("merchant-rejected:{reason}"), net);
            }
        }
    }

    fn on_session_key(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id().unwrap_or_default().to_string();
        let resp = env.decode::<SessionKeyMsg>().ok().map(|k| LoginResponse {
            session_id: k.session_id,
            cookie_token: env.cookie().unwrap_or_default().to_string(),
            wrapped_secret: WrappedKey(k.wrapped),
            welcome: String::new(),
        });
        let accepted = resp.map(|r| self.agent.accept_login(&r, &request).map(|_| ()));
        match accepted {
            Some(Ok(())) => {
                self.emit(net, "session-key-unwrapped", Some(&request), "");
                let mode = self.mode();
                match self.agent.select_mode(mode) {
                    Ok(cookie) => net.send_msg(
                        self.id(),
                        ActorId::Bank,
                        Channel::Web,
                        Some(&cookie),
                        Some(&request),
                        &SelectMode { mode },
                    ),
                    Err(_) => self.finish("mode-rejected", net),
                }
            }
            _ => {
                self.emit(net, "session-key-rejected", Some(&request), "");
                self.finish("key-unwrap-failed", net);
            }
        }
    }

    fn mode(&self) -> PaymentMode {
        match self.active.as_ref().map(|a| &a.job) {
            Some(Job::Pay(p)) => p.mode,
            _ => self.invoice_plan.mode,
        }
    }

    fn sms_plan(&self) -> (SmsPlan, SimTime) {
        match self.active.as_ref().map(|a| &a.job) {
            Some(Job::Pay(p)) => (p.sms, p.reply_delay),
            _ => (self.invoice_plan.sms, self.invoice_plan.reply_delay),
        }
    }

    fn on_tic_demand(&mut self, env: &Envelope, net: &mut Network) {
        let active = self.active.as_ref().expect("active checked");
        let request = active.request_id.clone();
        let mut order = active.order();
        order.mode = self.mode();
        self.emit(net, "order-composed", Some(&request), order.mode.as_str());
        match self.agent.compose_and_submit(&order) {
            Ok(sub) => {
                self.emit(net, "tic-picked", Some(&request), format!("{} left", self.agent.vault().len()));
                let body = SubmitPayment {
                    enc_tic: sub.enc_tic,
                    enc_order: sub.enc_order,
                };
                net.send_msg(
                    self.id(),
                    ActorId::Bank,
                    Channel::Web,
                    env.cookie(),
                    Some(&request),
                    &body,
                );
                if let Some(a) = self.active.as_mut() {
                    a.stage = Stage::AwaitingOutcome;
                }
            }
            Err(ClientError::Vault(VaultError::Empty)) => {
                self.emit(net, "vault-empty", Some(&request), "");
                self.finish("vault-empty", net);
            }
            Err(e) => {
                self.emit(net, "submit-failed", Some(&request), e.to_string());
                self.finish("submit-failed", net);
            }
        }
    }

    fn on_sms(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        let Ok(sms) = env.decode::<SmsConfirmRequest>() else {
            self.emit(net, "sms-malformed", request, "");
            return;
        };
        let prompt = SmsPrompt {
            request_id: request.unwrap_or_default().to_string(),
            txn_id: sms.txn_id,
            amount: sms.amount,
            text: sms.text,
        };
        let (plan, delay) = self.sms_plan();
        let is_active = self.active_for(env).is_some();
        let Some(decision) = plan.decision().filter(|_| is_active) else {
            self.emit(net, "sms-ignored", request, "");
            return;
        };
        match self.agent.answer_sms(&prompt, decision) {
            Ok(answer) => {
                let tag = format!("sms-reply:{}", answer.txn_id);
                self.queued_replies.insert(tag.clone(), answer);
                net.set_timer(self.handset(), net.now() + delay, tag);
            }
            Err(e) => self.emit(net, "sms-foreign", request, e.to_string()),
        }
    }

    pub fn timer(&mut self, tag: &str, net: &mut Network) {
        if let Some(answer) = self.queued_replies.remove(tag) {
            let body = SmsReply {
                txn_id: answer.txn_id,
                decision: answer.decision.as_str().to_string(),
            };
            let handset = self.handset();
            net.send_msg(handset, ActorId::Bank, Channel::Sms, None, Some(&answer.request_id), &body);
        }
    }
}
