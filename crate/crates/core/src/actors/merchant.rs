use crate::messages::{InvoiceMsg, MsgType};
use crate::netsim::{ActorId, Channel, Envelope, Network};
use crate::two_way::{
    AckVerdict, MerchantAgent, MerchantBank, MerchantVerdictMsg, MerchantVerify, NegativeReason, NoticeOutcome,
    PaymentConfirmation, SettlementNotice,
};

/// The merchant's bank: answers verifications and credits settlements.
#[derive(Debug)]
pub struct MerchantBankActor {
    pub bank: MerchantBank,
    /// Id of the customer bank, used as the clearing counterparty.
    pub customer_bank_id: String,
}

impl MerchantBankActor {
    pub fn new(bank: MerchantBank, customer_bank_id: impl Into<String>) -> Self {
        Self {
            bank,
            customer_bank_id: customer_bank_id.into(),
        }
    }

    pub fn deliver(&mut self, env: &Envelope, net: &mut Network) {
        let me = ActorId::MerchantBank;
        let request = env.request_id();
        if env.sender != ActorId::Bank {
            net.transition(&me, "ignored", request, format!("{} from {}", env.msg_type(), env.sender));
            return;
        }
        match env.msg_type() {
            MsgType::MerchantVerify => {
                let msg = match env.decode::<MerchantVerify>() {
                    Ok(req) => MerchantVerdictMsg {
                        request_id: req.request_id.clone(),
                        attempt: req.attempt,
                        verdict: self.bank.verify(&req, net.now()),
                    },
                    Err(_) => MerchantVerdictMsg {
                        request_id: request.unwrap_or_default().to_string(),
                        attempt: 0,
                        verdict: AckVerdict::Negative(NegativeReason::Malformed),
                    },
                };
                net.transition(
                    &me,
                    "merchant-checked",
                    request,
                    serde_json::to_string(&msg.verdict).expect("serializable"),
                );
                net.send_msg(me, ActorId::Bank, Channel::InterBank, None, request, &msg);
            }
            MsgType::SettlementNotice => {
                let Ok(notice) = env.decode::<SettlementNotice>() else {
                    net.transition(&me, "notice-malformed", request, "");
                    return;
                };
                match self.bank.confirm_receipt(&self.customer_bank_id, &notice) {
                    NoticeOutcome::Credited(conf) => {
                        net.transition(&me, "merchant-credited", request, notice.invoice_number.clone());
                        net.send_msg(me, ActorId::Merchant, Channel::Web, None, request, &conf);
                    }
                    NoticeOutcome::Duplicate => net.transition(&me, "duplicate-notice", request, ""),
                    NoticeOutcome::UnknownMerchant => net.transition(&me, "unknown-merchant", request, ""),
                }
            }
            other => net.transition(&me, "unexpected-message", request, other.as_str()),
        }
    }
}

/// The merchant storefront: sends invoices, collects confirmations.
#[derive(Debug)]
pub struct MerchantActor {
    pub agent: MerchantAgent,
    /// `(customer name, amount)` for each invoice, sent at start.
    pub invoices: Vec<(String, u64)>,
    pub sent: Vec<String>,
}

impl MerchantActor {
    pub fn new(agent: MerchantAgent, invoices: Vec<(String, u64)>) -> Self {
        Self {
            agent,
            invoices,
            sent: Vec::new(),
        }
    }

    pub fn confirmations(&self) -> &[PaymentConfirmation] {
        self.agent.confirmations()
    }

    pub fn start(&mut self, net: &mut Network) {
        for (customer, amount) in self.invoices.clone() {
            match self.agent.prepare_invoice(amount, net.now()) {
                Ok(bundle) => {
                    let body = InvoiceMsg {
                        invoice_number: bundle.invoice_number.clone(),
                        amount: bundle.amount,
                        enc_banking_info: bundle.enc_banking_info,
                        certificate: bundle.certificate,
                    };
                    let rid = bundle.invoice_number;
                    net.send_msg(
                        ActorId::Merchant,
                        ActorId::Client(customer),
                        Channel::Web,
                        None,
                        Some(&rid),
                        &body,
                    );
                    self.sent.push(rid);
                }
                Err(e) => net.transition(&ActorId::Merchant, "invoice-refused", None, e.to_string()),
            }
        }
    }

    pub fn deliver(&mut self, env: &Envelope, net: &mut Network) {
        let request = env.request_id();
        if env.sender != ActorId::MerchantBank || env.msg_type() != MsgType::PaymentConfirmation {
            net.transition(&ActorId::Merchant, "ignored", request, env.msg_type().as_str());
            return;
        }
        match env.decode::<PaymentConfirmation>() {
            Ok(c) => {
                net.transition(&ActorId::Merchant, "payment-confirmed", request, c.invoice_number.clone());
                self.agent.record_confirmation(c);
            }
            Err(_) => net.transition(&ActorId::Merchant, "confirmation-malformed", request, ""),
        }
    }
}
