//! Message types and their body schemas.
//!
//! Every body is a closed [`FieldMap`]: unknown tags are rejected on decode.
//! Ciphertexts travel as their wire encoding inside a single field.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::crypto::Ciphertext;
use crate::netsim::codec::{CodecError, FieldMap};
use crate::order::PaymentMode;
use crate::two_way::{
    AckVerdict, CustomerReceipt, MerchantAuthAck, MerchantAuthRequest, MerchantCertificate, MerchantVerdictMsg,
    MerchantVerify, PaymentConfirmation, SettlementNotice,
};

macro_rules! msg_types {
    ($($variant:ident => $name:literal),* $(,)?) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "kebab-case")]
        pub enum MsgType {
            $($variant),*
        }

        impl MsgType {
            pub const ALL: &'static [MsgType] = &[$(MsgType::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(MsgType::$variant => $name),*
                }
            }
        }
    };
}

msg_types! {
    LoginRequest => "login-request",
    LoginRejected => "login-rejected",
    Welcome => "welcome",
    SessionKey => "session-key",
    SelectMode => "select-mode",
    ModeRejected => "mode-rejected",
    TicDemand => "tic-demand",
    SubmitPayment => "submit-payment",
    PaymentRejected => "payment-rejected",
    SmsConfirmRequest => "sms-confirm-request",
    SmsReply => "sms-reply",
    TransactionOutcome => "transaction-outcome",
    Invoice => "invoice",
    MerchantAuthRequest => "merchant-auth-request",
    MerchantVerify => "merchant-verify",
    MerchantVerdict => "merchant-verdict",
    MerchantAuthAck => "merchant-auth-ack",
    SettlementNotice => "settlement-notice",
    CustomerReceipt => "customer-receipt",
    PaymentConfirmation => "payment-confirmation",
}

impl MsgType {
    pub fn code(self) -> u8 {
        Self::ALL.iter().position(|t| *t == self).expect("listed") as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).checked_sub(1)?).copied()
    }

    /// Messages that only exist once a customer is paying.
    pub fn is_payment_phase(self) -> bool {
        matches!(
            self,
            MsgType::LoginRequest
                | MsgType::Welcome
                | MsgType::SessionKey
                | MsgType::SelectMode
                | MsgType::TicDemand
                | MsgType::SubmitPayment
                | MsgType::SmsConfirmRequest
                | MsgType::SmsReply
                | MsgType::TransactionOutcome
                | MsgType::SettlementNotice
                | MsgType::CustomerReceipt
                | MsgType::PaymentConfirmation
        )
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MsgType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown message type {s:?}"))
    }
}

/// A typed envelope body.
pub trait Message: Sized {
    const TYPE: MsgType;
    const TAGS: &'static [u16];

    fn to_fields(&self) -> FieldMap;
    fn from_fields(m: &FieldMap) -> Result<Self, CodecError>;

    fn encode(&self) -> Vec<u8> {
        self.to_fields().encode()
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let m = FieldMap::decode(bytes)?;
        m.expect_only(Self::TAGS)?;
        Self::from_fields(&m)
    }
}

fn ciphertext(m: &FieldMap, tag: u16) -> Result<Ciphertext, CodecError> {
    Ciphertext::from_bytes(m.bytes(tag)?).map_err(|_| CodecError::InvalidValue(tag))
}

fn certificate(m: &FieldMap, tag: u16) -> Result<MerchantCertificate, CodecError> {
    MerchantCertificate::decode(m.bytes(tag)?).map_err(|_| CodecError::InvalidValue(tag))
}

fn verdict(m: &FieldMap, tag: u16) -> Result<AckVerdict, CodecError> {
    AckVerdict::from_code(m.u8(tag)?).ok_or(CodecError::InvalidValue(tag))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoginRequest {
    pub username: String,
    pub password: String,
}

impl Message for LoginRequest {
    const TYPE: MsgType = MsgType::LoginRequest;
    const TAGS: &'static [u16] = &[1, 2];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.username).put_str(2, &self.password);
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            username: m.str(1)?.to_string(),
            password: m.str(2)?.to_string(),
        })
    }
}

/// Body shared by the plain-notice replies: login rejected, mode rejected,
/// payment rejected and the TIC demand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Notice {
    pub text: String,
}

macro_rules! notice_message {
    ($name:ident, $ty:expr) => {
        #[derive(Clone, Debug, PartialEq, Eq)]
        pub struct $name(pub Notice);

        impl $name {
            pub fn new(text: impl Into<String>) -> Self {
                Self(Notice { text: text.into() })
            }
        }

        impl Message for $name {
            const TYPE: MsgType = $ty;
            const TAGS: &'static [u16] = &[1];

            fn to_fields(&self) -> FieldMap {
                let mut m = FieldMap::new();
                m.put_str(1, &self.0.text);
                m
            }

            fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
                Ok(Self::new(m.str(1)?))
            }
        }
    };
}

notice_message!(LoginRejected, MsgType::LoginRejected);
notice_message!(ModeRejected, MsgType::ModeRejected);
notice_message!(PaymentRejected, MsgType::PaymentRejected);
notice_message!(TicDemand, MsgType::TicDemand);
notice_message!(Welcome, MsgType::Welcome);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionKeyMsg {
    pub session_id: String,
    pub wrapped: Ciphertext,
}

impl Message for SessionKeyMsg {
    const TYPE: MsgType = MsgType::SessionKey;
    const TAGS: &'static [u16] = &[1, 2];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.session_id).put(2, self.wrapped.to_bytes());
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            session_id: m.str(1)?.to_string(),
            wrapped: ciphertext(m, 2)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectMode {
    pub mode: PaymentMode,
}

impl Message for SelectMode {
    const TYPE: MsgType = MsgType::SelectMode;
    const TAGS: &'static [u16] = &[1];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_u8(1, self.mode.code());
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            mode: PaymentMode::from_code(m.u8(1)?).ok_or(CodecError::InvalidValue(1))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubmitPayment {
    pub enc_tic: Ciphertext,
    pub enc_order: Ciphertext,
}

impl Message for SubmitPayment {
    const TYPE: MsgType = MsgType::SubmitPayment;
    const TAGS: &'static [u16] = &[1, 2];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put(1, self.enc_tic.to_bytes()).put(2, self.enc_order.to_bytes());
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            enc_tic: ciphertext(m, 1)?,
            enc_order: ciphertext(m, 2)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmsConfirmRequest {
    pub txn_id: String,
    pub amount: u64,
    pub text: String,
}

impl Message for SmsConfirmRequest {
    const TYPE: MsgType = MsgType::SmsConfirmRequest;
    const TAGS: &'static [u16] = &[1, 2, 3];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.txn_id).put_u64(2, self.amount).put_str(3, &self.text);
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            txn_id: m.str(1)?.to_string(),
            amount: m.u64(2)?,
            text: m.str(3)?.to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmsReply {
    pub txn_id: String,
    pub decision: String,
}

impl Message for SmsReply {
    const TYPE: MsgType = MsgType::SmsReply;
    const TAGS: &'static [u16] = &[1, 2];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.txn_id).put_str(2, &self.decision);
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            txn_id: m.str(1)?.to_string(),
            decision: m.str(2)?.to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionOutcome {
    pub txn_id: String,
    /// `committed`, or `aborted:<reason>`.
    pub state: String,
}

impl Message for TransactionOutcome {
    const TYPE: MsgType = MsgType::TransactionOutcome;
    const TAGS: &'static [u16] = &[1, 2];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.txn_id).put_str(2, &self.state);
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            txn_id: m.str(1)?.to_string(),
            state: m.str(2)?.to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvoiceMsg {
    pub invoice_number: String,
    pub amount: u64,
    pub enc_banking_info: Ciphertext,
    pub certificate: MerchantCertificate,
}

impl Message for InvoiceMsg {
    const TYPE: MsgType = MsgType::Invoice;
    const TAGS: &'static [u16] = &[1, 2, 3, 4];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.invoice_number)
            .put_u64(2, self.amount)
            .put(3, self.enc_banking_info.to_bytes())
            .put(4, self.certificate.encode());
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            invoice_number: m.str(1)?.to_string(),
            amount: m.u64(2)?,
            enc_banking_info: ciphertext(m, 3)?,
            certificate: certificate(m, 4)?,
        })
    }
}

impl Message for MerchantAuthRequest {
    const TYPE: MsgType = MsgType::MerchantAuthRequest;
    const TAGS: &'static [u16] = &[1, 2, 3, 4, 5, 6];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.invoice_number)
            .put_u64(2, self.amount)
            .put_str(3, &self.merchant_bank_id)
            .put_str(4, &self.account_ref)
            .put(5, self.enc_banking_info.to_bytes())
            .put(6, self.certificate.encode());
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            invoice_number: m.str(1)?.to_string(),
            amount: m.u64(2)?,
            merchant_bank_id: m.str(3)?.to_string(),
            account_ref: m.str(4)?.to_string(),
            enc_banking_info: ciphertext(m, 5)?,
            certificate: certificate(m, 6)?,
        })
    }
}

/// The certificate is the last field, so its signature ends the body.
impl Message for MerchantVerify {
    const TYPE: MsgType = MsgType::MerchantVerify;
    const TAGS: &'static [u16] = &[1, 2, 3, 4];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.request_id)
            .put_u64(2, self.attempt as u64)
            .put(3, self.enc_banking_info.to_bytes())
            .put(4, self.certificate.encode());
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            request_id: m.str(1)?.to_string(),
            attempt: u32::try_from(m.u64(2)?).map_err(|_| CodecError::InvalidValue(2))?,
            enc_banking_info: ciphertext(m, 3)?,
            certificate: certificate(m, 4)?,
        })
    }
}

impl Message for MerchantVerdictMsg {
    const TYPE: MsgType = MsgType::MerchantVerdict;
    const TAGS: &'static [u16] = &[1, 2, 3];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.request_id)
            .put_u64(2, self.attempt as u64)
            .put_u8(3, self.verdict.code());
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            request_id: m.str(1)?.to_string(),
            attempt: u32::try_from(m.u64(2)?).map_err(|_| CodecError::InvalidValue(2))?,
            verdict: verdict(m, 3)?,
        })
    }
}

impl Message for MerchantAuthAck {
    const TYPE: MsgType = MsgType::MerchantAuthAck;
    const TAGS: &'static [u16] = &[1, 2];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.request_id).put_u8(2, self.verdict.code());
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            request_id: m.str(1)?.to_string(),
            verdict: verdict(m, 2)?,
        })
    }
}

impl Message for SettlementNotice {
    const TYPE: MsgType = MsgType::SettlementNotice;
    const TAGS: &'static [u16] = &[1, 2, 3, 4];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.invoice_number)
            .put_str(2, &self.merchant_id)
            .put_str(3, &self.customer_id)
            .put_u64(4, self.amount);
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            invoice_number: m.str(1)?.to_string(),
            merchant_id: m.str(2)?.to_string(),
            customer_id: m.str(3)?.to_string(),
            amount: m.u64(4)?,
        })
    }
}

impl Message for CustomerReceipt {
    const TYPE: MsgType = MsgType::CustomerReceipt;
    const TAGS: &'static [u16] = &[1, 2, 3];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.invoice_number)
            .put_str(2, &self.merchant_id)
            .put_u64(3, self.amount);
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            invoice_number: m.str(1)?.to_string(),
            merchant_id: m.str(2)?.to_string(),
            amount: m.u64(3)?,
        })
    }
}

impl Message for PaymentConfirmation {
    const TYPE: MsgType = MsgType::PaymentConfirmation;
    const TAGS: &'static [u16] = &[1, 2, 3];

    fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(1, &self.invoice_number)
            .put_str(2, &self.customer_id)
            .put_u64(3, self.amount);
        m
    }

    fn from_fields(m: &FieldMap) -> Result<Self, CodecError> {
        Ok(Self {
            invoice_number: m.str(1)?.to_string(),
            customer_id: m.str(2)?.to_string(),
            amount: m.u64(3)?,
        })
    }
}

/// Field names, per message type, that a merchant agent may ever receive.
pub fn merchant_visible_fields(msg_type: MsgType) -> Option<&'static [&'static str]> {
    match msg_type {
        MsgType::PaymentConfirmation => Some(&["invoice_number", "customer_id", "amount"]),
        _ => None,
    }
}

/// Non-secret fields of a body, for trace export. Ciphertexts and passwords
/// are reduced to their length.
pub fn public_fields(msg_type: MsgType, body: &[u8]) -> BTreeMap<&'static str, Value> {
    fn go(msg_type: MsgType, body: &[u8]) -> Result<BTreeMap<&'static str, Value>, CodecError> {
        let mut out = BTreeMap::new();
        match msg_type {
            MsgType::LoginRequest => {
                let b = LoginRequest::decode(body)?;
                out.insert("username", json!(b.username));
            }
            MsgType::LoginRejected => {
                out.insert("text", json!(LoginRejected::decode(body)?.0.text));
            }
            MsgType::ModeRejected => {
                out.insert("text", json!(ModeRejected::decode(body)?.0.text));
            }
            MsgType::PaymentRejected => {
                out.insert("text", json!(PaymentRejected::decode(body)?.0.text));
            }
            MsgType::TicDemand => {
                out.insert("text", json!(TicDemand::decode(body)?.0.text));
            }
            MsgType::Welcome => {
                out.insert("text", json!(Welcome::decode(body)?.0.text));
            }
            MsgType::SessionKey => {
                let b = SessionKeyMsg::decode(body)?;
                out.insert("session_id", json!(b.session_id));
                out.insert("wrapped_len", json!(b.wrapped.body.len()));
            }
            MsgType::SelectMode => {
                out.insert("mode", json!(SelectMode::decode(body)?.mode.as_str()));
            }
            MsgType::SubmitPayment => {
                let b = SubmitPayment::decode(body)?;
                out.insert("enc_tic_len", json!(b.enc_tic.body.len()));
                out.insert("enc_order_len", json!(b.enc_order.body.len()));
            }
            MsgType::SmsConfirmRequest => {
                let b = SmsConfirmRequest::decode(body)?;
                out.insert("txn_id", json!(b.txn_id));
                out.insert("amount", json!(b.amount));
            }
            MsgType::SmsReply => {
                let b = SmsReply::decode(body)?;
                out.insert("txn_id", json!(b.txn_id));
                out.insert("decision", json!(b.decision));
            }
            MsgType::TransactionOutcome => {
                let b = TransactionOutcome::decode(body)?;
                out.insert("txn_id", json!(b.txn_id));
                out.insert("state", json!(b.state));
            }
            MsgType::Invoice => {
                let b = InvoiceMsg::decode(body)?;
                out.insert("invoice_number", json!(b.invoice_number));
                out.insert("amount", json!(b.amount));
                out.insert("merchant_id", json!(b.certificate.merchant_id));
            }
            MsgType::MerchantAuthRequest => {
                let b = MerchantAuthRequest::decode(body)?;
                out.insert("invoice_number", json!(b.invoice_number));
                out.insert("amount", json!(b.amount));
                out.insert("merchant_bank_id", json!(b.merchant_bank_id));
                out.insert("account_ref", json!(b.account_ref));
            }
            MsgType::MerchantVerify => {
                let b = MerchantVerify::decode(body)?;
                out.insert("request_id", json!(b.request_id));
                out.insert("attempt", json!(b.attempt));
                out.insert("merchant_id", json!(b.certificate.merchant_id));
            }
            MsgType::MerchantVerdict => {
                let b = MerchantVerdictMsg::decode(body)?;
                out.insert("request_id", json!(b.request_id));
                out.insert("attempt", json!(b.attempt));
                out.insert("verdict", json!(b.verdict));
            }
            MsgType::MerchantAuthAck => {
                let b = MerchantAuthAck::decode(body)?;
                out.insert("request_id", json!(b.request_id));
                out.insert("verdict", json!(b.verdict));
            }
            MsgType::SettlementNotice => {
                let b = SettlementNotice::decode(body)?;
                out.insert("invoice_number", json!(b.invoice_number));
                out.insert("merchant_id", json!(b.merchant_id));
                out.insert("customer_id", json!(b.customer_id));
                out.insert("amount", json!(b.amount));
            }
            MsgType::CustomerReceipt => {
                let b = CustomerReceipt::decode(body)?;
                out.insert("invoice_number", json!(b.invoice_number));
                out.insert("amount", json!(b.amount));
            }
            MsgType::PaymentConfirmation => {
                let b = PaymentConfirmation::decode(body)?;
                out.insert("invoice_number", json!(b.invoice_number));
                out.insert("customer_id", json!(b.customer_id));
                out.insert("amount", json!(b.amount));
            }
        }
        Ok(out)
    }
    go(msg_type, body).unwrap_or_else(|e| BTreeMap::from([("decode_error", json!(e.to_string()))]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::KeyRole;

    fn ct(n: usize) -> Ciphertext {
        Ciphertext {
            key_role: KeyRole::TicKeyed,
            nonce: [7; 12],
            body: vec![0xaa; n],
            tag: [1; 16],
        }
    }

    #[test]
    fn type_codes_round_trip() {
        for t in MsgType::ALL {
            assert_eq!(MsgType::from_code(t.code()), Some(*t));
            assert_eq!(t.as_str().parse::<MsgType>().unwrap(), *t);
        }
        assert_eq!(MsgType::from_code(0), None);
    }

    #[test]
    fn bodies_round_trip() {
        let s = SubmitPayment {
            enc_tic: ct(16),
            enc_order: ct(40),
        };
        assert_eq!(SubmitPayment::decode(&s.encode()).unwrap(), s);
        let r = SmsReply {
            txn_id: "T1".into(),
            decision: "YES".into(),
        };
        assert_eq!(SmsReply::decode(&r.encode()).unwrap(), r);
        let p = PaymentConfirmation {
            invoice_number: "INV-1".into(),
            customer_id: "ab".into(),
            amount: 9,
        };
        assert_eq!(PaymentConfirmation::decode(&p.encode()).unwrap(), p);
    }

    #[test]
    fn schemas_are_closed() {
        let mut m = SmsReply {
            txn_id: "T1".into(),
            decision: "YES".into(),
        }
        .to_fields();
        m.put_str(9, "extra");
        assert_eq!(SmsReply::decode(&m.encode()), Err(CodecError::UnexpectedField(9)));
    }

    #[test]
    fn public_fields_hide_password_and_ciphertexts() {
        let body = LoginRequest {
            username: "alice".into(),
            password: "s3cret".into(),
        }
        .encode();
        let f = public_fields(MsgType::LoginRequest, &body);
        assert_eq!(f.get("username"), Some(&json!("alice")));
        assert!(!serde_json::to_string(&f).unwrap().contains("s3cret"));
        let f = public_fields(MsgType::SubmitPayment, &[0, 1]);
        assert!(f.contains_key("decode_error"));
    }
}
