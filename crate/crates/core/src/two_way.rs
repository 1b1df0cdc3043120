//! Two-way authentication: the merchant is authenticated to the customer
//! through both banks before any payment data moves, and payment settles
//! bank to bank.
//!
//! Parties and their state:
//!
//! - [`MerchantAgent`] holds its certificate and an opaque, bank-sealed copy
//!   of its banking details. It issues invoices and only ever learns
//!   `(invoice_number, customer digest, amount)` back.
//! - [`MerchantBank`] signs certificates, verifies them on request, and
//!   credits the merchant once per invoice when a settlement notice arrives.
//! - [`MerchantVerifications`] is the customer bank's book of outstanding
//!   merchant checks. Every request starts a fresh check; nothing is cached.

use std::collections::{BTreeMap, BTreeSet};

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::auth_server::{InvoiceTerms, PaymentGate};
use crate::crypto::{derive_key, Binding, Ciphertext, HybridCrypto, KeyBytes, KeyRole};
use crate::digest::account_ref_digest;
use crate::netsim::codec::{CodecError, FieldMap};
use crate::SimTime;

type HmacSha256 = Hmac<Sha256>;

const BANKING_INFO_PURPOSE: &str = "merchant-banking-info";

/// Payee reference a customer order uses for a merchant, derived from the
/// certificate's account digest. Never the account number itself.
pub fn merchant_payee_ref(account_ref: &str) -> String {
    format!("ref:{account_ref}")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerchantCertificate {
    pub merchant_id: String,
    pub merchant_bank_id: String,
    pub display_name: String,
    pub account_ref: String,
    pub valid_from: SimTime,
    pub valid_until: SimTime,
    pub signature: [u8; 32],
}

mod cert_tag {
    pub const MERCHANT: u16 = 1;
    pub const BANK: u16 = 2;
    pub const NAME: u16 = 3;
    pub const ACCOUNT_REF: u16 = 4;
    pub const FROM: u16 = 5;
    pub const UNTIL: u16 = 6;
    pub const SIGNATURE: u16 = 15;
}

impl MerchantCertificate {
    fn signed_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_str(cert_tag::MERCHANT, &self.merchant_id)
            .put_str(cert_tag::BANK, &self.merchant_bank_id)
            .put_str(cert_tag::NAME, &self.display_name)
            .put_str(cert_tag::ACCOUNT_REF, &self.account_ref)
            .put_u64(cert_tag::FROM, self.valid_from)
            .put_u64(cert_tag::UNTIL, self.valid_until);
        m
    }

    /// The signature is the last field, so it is the tail of the encoding.
    pub fn encode(&self) -> Vec<u8> {
        let mut m = self.signed_fields();
        m.put(cert_tag::SIGNATURE, self.signature);
        m.encode()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let m = FieldMap::decode(bytes)?;
        m.expect_only(&[
            cert_tag::MERCHANT,
            cert_tag::BANK,
            cert_tag::NAME,
            cert_tag::ACCOUNT_REF,
            cert_tag::FROM,
            cert_tag::UNTIL,
            cert_tag::SIGNATURE,
        ])?;
        let sig = m.bytes(cert_tag::SIGNATURE)?;
        Ok(Self {
            merchant_id: m.str(cert_tag::MERCHANT)?.to_string(),
            merchant_bank_id: m.str(cert_tag::BANK)?.to_string(),
            display_name: m.str(cert_tag::NAME)?.to_string(),
            account_ref: m.str(cert_tag::ACCOUNT_REF)?.to_string(),
            valid_from: m.u64(cert_tag::FROM)?,
            valid_until: m.u64(cert_tag::UNTIL)?,
            signature: sig.try_into().map_err(|_| CodecError::BadLength {
                tag: cert_tag::SIGNATURE,
                expected: 32,
                found: sig.len(),
            })?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeReason {
    BadSignature,
    Expired,
    UnknownMerchant,
    NotInGoodStanding,
    UnknownMerchantBank,
    BankingInfoMismatch,
    Malformed,
    Timeout,
}

impl NegativeReason {
    pub const ALL: [NegativeReason; 8] = [
        NegativeReason::BadSignature,
        NegativeReason::Expired,
        NegativeReason::UnknownMerchant,
        NegativeReason::NotInGoodStanding,
        NegativeReason::UnknownMerchantBank,
        NegativeReason::BankingInfoMismatch,
        NegativeReason::Malformed,
        NegativeReason::Timeout,
    ];

    pub fn code(self) -> u8 {
        Self::ALL.iter().position(|r| *r == self).expect("listed") as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).checked_sub(1)?).copied()
    }

    /// The coarse category shown to the customer.
    pub fn category(self) -> &'static str {
        match self {
            NegativeReason::Timeout => "merchant-unverifiable",
            _ => "merchant-not-authenticated",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AckVerdict {
    Positive,
    Negative(NegativeReason),
}

impl AckVerdict {
    pub fn code(self) -> u8 {
        match self {
            AckVerdict::Positive => 0,
            AckVerdict::Negative(r) => r.code(),
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(AckVerdict::Positive),
            c => NegativeReason::from_code(c).map(AckVerdict::Negative),
        }
    }

    pub fn is_positive(self) -> bool {
        self == AckVerdict::Positive
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvoiceBundle {
    pub invoice_number: String,
    pub amount: u64,
    pub enc_banking_info: Ciphertext,
    pub certificate: MerchantCertificate,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TwoWayError {
    #[error("merchant has no live certificate")]
    NoCertificate,
    #[error("invoice amount must be positive")]
    ZeroAmount,
    #[error("invoice bundle is inconsistent: {0}")]
    MalformedBundle(&'static str),
}

/// The merchant's online agent.
#[derive(Clone, Debug)]
pub struct MerchantAgent {
    pub merchant_id: String,
    certificate: Option<MerchantCertificate>,
    enc_banking_info: Option<Ciphertext>,
    next_invoice: u64,
    confirmations: Vec<PaymentConfirmation>,
}

impl MerchantAgent {
    pub fn new(merchant_id: impl Into<String>) -> Self {
        Self {
            merchant_id: merchant_id.into(),
            certificate: None,
            enc_banking_info: None,
            next_invoice: 1,
            confirmations: Vec::new(),
        }
    }

    pub fn install(&mut self, enrollment: MerchantEnrollment) {
        self.certificate = Some(enrollment.certificate);
        self.enc_banking_info = Some(enrollment.enc_banking_info);
    }

    pub fn certificate(&self) -> Option<&MerchantCertificate> {
        self.certificate.as_ref()
    }

    pub fn prepare_invoice(&mut self, cart_total: u64, now: SimTime) -> Result<InvoiceBundle, TwoWayError> {
        let (Some(cert), Some(info)) = (&self.certificate, &self.enc_banking_info) else {
            return Err(TwoWayError::NoCertificate);
        };
        if now > cert.valid_until {
            return Err(TwoWayError::NoCertificate);
        }
        if cart_total == 0 {
            return Err(TwoWayError::ZeroAmount);
        }
        let invoice_number = format!("INV-{}-{:04}", self.merchant_id, self.next_invoice);
        self.next_invoice += 1;
        Ok(InvoiceBundle {
            invoice_number,
            amount: cart_total,
            enc_banking_info: info.clone(),
            certificate: cert.clone(),
        })
    }

    /// Like [`prepare_invoice`](Self::prepare_invoice) but skips the local
    /// validity check, for driving expired-certificate scenarios.
    pub fn prepare_invoice_unchecked(&mut self, cart_total: u64) -> Result<InvoiceBundle, TwoWayError> {
        self.prepare_invoice(cart_total, 0)
    }

    pub fn record_confirmation(&mut self, c: PaymentConfirmation) {
        self.confirmations.push(c);
    }

    pub fn confirmations(&self) -> &[PaymentConfirmation] {
        &self.confirmations
    }
}

/// Customer-side merchant authentication request (customer agent → customer bank).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerchantAuthRequest {
    pub invoice_number: String,
    pub amount: u64,
    pub merchant_bank_id: String,
    pub account_ref: String,
    pub certificate: MerchantCertificate,
    pub enc_banking_info: Ciphertext,
}

/// Checks a bundle locally and turns it into the authentication request.
pub fn request_merchant_auth(bundle: &InvoiceBundle) -> Result<MerchantAuthRequest, TwoWayError> {
    if bundle.invoice_number.is_empty() {
        return Err(TwoWayError::MalformedBundle("empty invoice number"));
    }
    if bundle.amount == 0 {
        return Err(TwoWayError::ZeroAmount);
    }
    if bundle.certificate.merchant_bank_id.is_empty() || bundle.certificate.account_ref.is_empty() {
        return Err(TwoWayError::MalformedBundle("certificate lacks bank or account reference"));
    }
    if bundle.enc_banking_info.key_role != KeyRole::BankSealed {
        return Err(TwoWayError::MalformedBundle("banking info is not bank-sealed"));
    }
    Ok(MerchantAuthRequest {
        invoice_number: bundle.invoice_number.clone(),
        amount: bundle.amount,
        merchant_bank_id: bundle.certificate.merchant_bank_id.clone(),
        account_ref: bundle.certificate.account_ref.clone(),
        certificate: bundle.certificate.clone(),
        enc_banking_info: bundle.enc_banking_info.clone(),
    })
}

/// Customer bank → merchant bank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerchantVerify {
    pub request_id: String,
    pub attempt: u32,
    pub enc_banking_info: Ciphertext,
    pub certificate: MerchantCertificate,
}

/// Merchant bank → customer bank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerchantVerdictMsg {
    pub request_id: String,
    pub attempt: u32,
    pub verdict: AckVerdict,
}

/// Customer bank → customer agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerchantAuthAck {
    pub request_id: String,
    pub verdict: AckVerdict,
}

/// Customer bank → merchant bank after commit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SettlementNotice {
    pub invoice_number: String,
    pub merchant_id: String,
    pub customer_id: String,
    pub amount: u64,
}

/// Customer bank → customer agent after commit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CustomerReceipt {
    pub invoice_number: String,
    pub merchant_id: String,
    pub amount: u64,
}

/// Merchant bank → merchant agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaymentConfirmation {
    pub invoice_number: String,
    pub customer_id: String,
    pub amount: u64,
}

#[derive(Clone, Debug)]
pub struct MerchantEnrollment {
    pub certificate: MerchantCertificate,
    pub enc_banking_info: Ciphertext,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerchantAccount {
    pub merchant_id: String,
    pub display_name: String,
    pub account_number: String,
    pub balance: i64,
    pub good_standing: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoticeOutcome {
    Credited(PaymentConfirmation),
    Duplicate,
    UnknownMerchant,
}

#[derive(Clone, Debug)]
pub struct MerchantBank {
    pub bank_id: String,
    signing_key: KeyBytes,
    sealing_key: KeyBytes,
    crypto: HybridCrypto,
    merchants: BTreeMap<String, MerchantAccount>,
    /// Net position against each customer bank; negative means owed to us.
    clearing: BTreeMap<String, i64>,
    settled: BTreeSet<String>,
}

mod info_tag {
    pub const MERCHANT: u16 = 1;
    pub const ACCOUNT: u16 = 2;
}

impl MerchantBank {
    pub fn new(bank_id: impl Into<String>, master_secret: &[u8], crypto: HybridCrypto) -> Self {
        let bank_id = bank_id.into();
        let signing_key = derive_key("ticpay/v1/merchant-cert", &[master_secret, bank_id.as_bytes()].concat());
        let sealing_key = derive_key("ticpay/v1/bank-seal", &[master_secret, bank_id.as_bytes()].concat());
        Self {
            bank_id,
            signing_key,
            sealing_key,
            crypto,
            merchants: BTreeMap::new(),
            clearing: BTreeMap::new(),
            settled: BTreeSet::new(),
        }
    }

    fn sign(&self, cert: &MerchantCertificate) -> [u8; 32] {
        let mut mac = <HmacSha256 as Mac>::new_from_slice(&self.signing_key).expect("any key length");
        mac.update(&cert.signed_fields().encode());
        mac.finalize().into_bytes().into()
    }

    fn signature_valid(&self, cert: &MerchantCertificate) -> bool {
        let mut mac = <HmacSha256 as Mac>::new_from_slice(&self.signing_key).expect("any key length");
        mac.update(&cert.signed_fields().encode());
        mac.verify_slice(&cert.signature).is_ok()
    }

    /// Opens an account and issues the merchant its certificate and sealed
    /// banking details.
    pub fn enroll(
        &mut self,
        account: MerchantAccount,
        valid_from: SimTime,
        valid_until: SimTime,
    ) -> MerchantEnrollment {
        let mut certificate = MerchantCertificate {
            merchant_id: account.merchant_id.clone(),
            merchant_bank_id: self.bank_id.clone(),
            display_name: account.display_name.clone(),
            account_ref: account_ref_digest(&account.account_number),
            valid_from,
            valid_until,
            signature: [0; 32],
        };
        certificate.signature = self.sign(&certificate);
        let mut info = FieldMap::new();
        info.put_str(info_tag::MERCHANT, &account.merchant_id)
            .put_str(info_tag::ACCOUNT, &account.account_number);
        let binding = Binding::new(&account.merchant_id, BANKING_INFO_PURPOSE);
        let enc_banking_info = self
            .crypto
            .seal(KeyRole::BankSealed, &self.sealing_key, &binding, &info.encode());
        self.merchants.insert(account.merchant_id.clone(), account);
        MerchantEnrollment {
            certificate,
            enc_banking_info,
        }
    }

    pub fn merchant(&self, merchant_id: &str) -> Option<&MerchantAccount> {
        self.merchants.get(merchant_id)
    }

    pub fn merchants(&self) -> impl Iterator<Item = &MerchantAccount> {
        self.merchants.values()
    }

    pub fn set_good_standing(&mut self, merchant_id: &str, good: bool) {
        if let Some(m) = self.merchants.get_mut(merchant_id) {
            m.good_standing = good;
        }
    }

    pub fn clearing_balance(&self, counterparty: &str) -> i64 {
        self.clearing.get(counterparty).copied().unwrap_or(0)
    }

    pub fn total_funds(&self) -> i64 {
        self.merchants.values().map(|m| m.balance).sum::<i64>() + self.clearing.values().sum::<i64>()
    }

    pub fn verify(&self, req: &MerchantVerify, now: SimTime) -> AckVerdict {
        use NegativeReason::*;
        let cert = &req.certificate;
        if cert.merchant_bank_id != self.bank_id {
            return AckVerdict::Negative(UnknownMerchantBank);
        }
        if !self.signature_valid(cert) {
            return AckVerdict::Negative(BadSignature);
        }
        if now < cert.valid_from || now > cert.valid_until {
            return AckVerdict::Negative(Expired);
        }
        let Some(account) = self.merchants.get(&cert.merchant_id) else {
            return AckVerdict::Negative(UnknownMerchant);
        };
        if !account.good_standing {
            return AckVerdict::Negative(NotInGoodStanding);
        }
        match self.open_banking_info(&cert.merchant_id, &req.enc_banking_info) {
            Some((id, number)) if id == account.merchant_id && number == account.account_number => {}
            _ => return AckVerdict::Negative(BankingInfoMismatch),
        }
        if cert.account_ref != account_ref_digest(&account.account_number) {
            return AckVerdict::Negative(BankingInfoMismatch);
        }
        AckVerdict::Positive
    }

    fn open_banking_info(&self, merchant_id: &str, ct: &Ciphertext) -> Option<(String, String)> {
        let binding = Binding::new(merchant_id, BANKING_INFO_PURPOSE);
        let plain = self
            .crypto
            .open(KeyRole::BankSealed, &self.sealing_key, &binding, ct)
            .ok()?;
        let m = FieldMap::decode(&plain).ok()?;
        Some((
            m.str(info_tag::MERCHANT).ok()?.to_string(),
            m.str(info_tag::ACCOUNT).ok()?.to_string(),
        ))
    }

    /// Credits the merchant once per invoice; repeated notices change nothing.
    pub fn confirm_receipt(&mut self, from_bank: &str, notice: &SettlementNotice) -> NoticeOutcome {
        if self.settled.contains(&notice.invoice_number) {
            return NoticeOutcome::Duplicate;
        }
        let Some(account) = self.merchants.get_mut(&notice.merchant_id) else {
            return NoticeOutcome::UnknownMerchant;
        };
        account.balance += notice.amount as i64;
        *self.clearing.entry(from_bank.to_string()).or_default() -= notice.amount as i64;
        self.settled.insert(notice.invoice_number.clone());
        NoticeOutcome::Credited(PaymentConfirmation {
            invoice_number: notice.invoice_number.clone(),
            customer_id: notice.customer_id.clone(),
            amount: notice.amount,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VerifyState {
    Pending { attempt: u32, deadline: SimTime },
    Decided { attempt: u32, verdict: AckVerdict },
}

#[derive(Clone, Debug)]
pub struct VerificationEntry {
    pub terms: InvoiceTerms,
    pub state: VerifyState,
}

/// The customer bank's outstanding merchant checks, keyed by request id.
#[derive(Clone, Debug, Default)]
pub struct MerchantVerifications {
    timeout: SimTime,
    entries: BTreeMap<String, VerificationEntry>,
    attempts: u32,
}

impl MerchantVerifications {
    pub fn new(timeout: SimTime) -> Self {
        Self {
            timeout,
            ..Self::default()
        }
    }

    /// Starts a fresh check, discarding any earlier verdict for this request.
    pub fn begin(&mut self, req: &MerchantAuthRequest, now: SimTime) -> MerchantVerify {
        self.attempts += 1;
        let attempt = self.attempts;
        self.entries.insert(
            req.invoice_number.clone(),
            VerificationEntry {
                terms: InvoiceTerms {
                    invoice_number: req.invoice_number.clone(),
                    amount: req.amount,
                    payee_ref: merchant_payee_ref(&req.account_ref),
                    merchant_id: req.certificate.merchant_id.clone(),
                    merchant_bank_id: req.merchant_bank_id.clone(),
                },
                state: VerifyState::Pending {
                    attempt,
                    deadline: now + self.timeout,
                },
            },
        );
        MerchantVerify {
            request_id: req.invoice_number.clone(),
            attempt,
            enc_banking_info: req.enc_banking_info.clone(),
            certificate: req.certificate.clone(),
        }
    }

    /// Records a verdict for the current attempt. Stale or unsolicited
    /// verdicts return `None`.
    pub fn resolve(&mut self, msg: &MerchantVerdictMsg, now: SimTime) -> Option<AckVerdict> {
        let entry = self.entries.get_mut(&msg.request_id)?;
        match entry.state {
            VerifyState::Pending { attempt, deadline } if attempt == msg.attempt => {
                let verdict = if now > deadline {
                    AckVerdict::Negative(NegativeReason::Timeout)
                } else {
                    msg.verdict
                };
                entry.state = VerifyState::Decided { attempt, verdict };
                Some(verdict)
            }
            _ => None,
        }
    }

    /// Times out every check whose deadline is behind `now`.
    pub fn expire(&mut self, now: SimTime) -> Vec<MerchantAuthAck> {
        let mut out = Vec::new();
        for (id, entry) in &mut self.entries {
            if let VerifyState::Pending { attempt, deadline } = entry.state {
                if deadline < now {
                    let verdict = AckVerdict::Negative(NegativeReason::Timeout);
                    entry.state = VerifyState::Decided { attempt, verdict };
                    out.push(MerchantAuthAck {
                        request_id: id.clone(),
                        verdict,
                    });
                }
            }
        }
        out
    }

    pub fn entry(&self, request_id: &str) -> Option<&VerificationEntry> {
        self.entries.get(request_id)
    }

    pub fn is_tracked(&self, request_id: &str) -> bool {
        self.entries.contains_key(request_id)
    }

    /// The payment gate for a request: merchant terms after a positive
    /// verdict, denial for anything else that is tracked.
    pub fn gate(&self, request_id: &str) -> PaymentGate {
        match self.entries.get(request_id) {
            None => PaymentGate::Direct,
            Some(VerificationEntry {
                terms,
                state: VerifyState::Decided {
                    verdict: AckVerdict::Positive,
                    ..
                },
            }) => PaymentGate::Merchant(terms.clone()),
            Some(_) => PaymentGate::Denied,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::CipherKind;

    const ACCOUNT: &str = "MACC-8800-1234-5678";

    fn bank() -> MerchantBank {
        MerchantBank::new("mbank", b"master", HybridCrypto::new(CipherKind::ChaCha20Poly1305, 3))
    }

    fn enrolled(valid_until: SimTime) -> (MerchantBank, MerchantAgent) {
        let mut b = bank();
        let e = b.enroll(
            MerchantAccount {
                merchant_id: "shop".into(),
                display_name: "Corner Shop".into(),
                account_number: ACCOUNT.into(),
                balance: 0,
                good_standing: true,
            },
            0,
            valid_until,
        );
        let mut ma = MerchantAgent::new("shop");
        ma.install(e);
        (b, ma)
    }

    fn verify_msg(bundle: &InvoiceBundle) -> MerchantVerify {
        let req = request_merchant_auth(bundle).unwrap();
        MerchantVerifications::new(10).begin(&req, 0)
    }

    #[test]
    fn valid_certificate_is_positive() {
        let (b, mut ma) = enrolled(1000);
        let bundle = ma.prepare_invoice(120, 5).unwrap();
        assert_eq!(b.verify(&verify_msg(&bundle), 5), AckVerdict::Positive);
    }

    #[test]
    fn invoices_are_distinct() {
        let (_, mut ma) = enrolled(1000);
        let a = ma.prepare_invoice(1, 0).unwrap();
        let b = ma.prepare_invoice(1, 0).unwrap();
        assert_ne!(a.invoice_number, b.invoice_number);
    }

    #[test]
    fn unenrolled_merchant_cannot_invoice() {
        let mut ma = MerchantAgent::new("ghost");
        assert_eq!(ma.prepare_invoice(5, 0).unwrap_err(), TwoWayError::NoCertificate);
    }

    #[test]
    fn bundle_hides_account_number() {
        let (_, mut ma) = enrolled(1000);
        let bundle = ma.prepare_invoice(5, 0).unwrap();
        let blob = [bundle.certificate.encode(), bundle.enc_banking_info.to_bytes()].concat();
        assert!(!blob.windows(ACCOUNT.len()).any(|w| w == ACCOUNT.as_bytes()));
    }

    #[test]
    fn expired_certificate_is_negative() {
        let (b, mut ma) = enrolled(10);
        let bundle = ma.prepare_invoice_unchecked(5).unwrap();
        assert_eq!(
            b.verify(&verify_msg(&bundle), 11),
            AckVerdict::Negative(NegativeReason::Expired)
        );
        assert_eq!(ma.prepare_invoice(5, 11).unwrap_err(), TwoWayError::NoCertificate);
    }

    #[test]
    fn any_signature_bit_flip_is_negative() {
        let (b, mut ma) = enrolled(1000);
        let bundle = ma.prepare_invoice(5, 0).unwrap();
        for bit in 0..256 {
            let mut msg = verify_msg(&bundle);
            msg.certificate.signature[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(b.verify(&msg, 1), AckVerdict::Negative(NegativeReason::BadSignature));
        }
        let mut msg = verify_msg(&bundle);
        msg.certificate.valid_until += 1;
        assert_eq!(b.verify(&msg, 1), AckVerdict::Negative(NegativeReason::BadSignature));
    }

    #[test]
    fn other_bank_and_standing() {
        let (mut b, mut ma) = enrolled(1000);
        let bundle = ma.prepare_invoice(5, 0).unwrap();
        let other = MerchantBank::new("obank", b"master", HybridCrypto::new(CipherKind::ChaCha20Poly1305, 4));
        assert_eq!(
            other.verify(&verify_msg(&bundle), 1),
            AckVerdict::Negative(NegativeReason::UnknownMerchantBank)
        );
        b.set_good_standing("shop", false);
        assert_eq!(
            b.verify(&verify_msg(&bundle), 1),
            AckVerdict::Negative(NegativeReason::NotInGoodStanding)
        );
    }

    #[test]
    fn swapped_banking_info_is_negative() {
        let (mut b, mut ma) = enrolled(1000);
        let other = b.enroll(
            MerchantAccount {
                merchant_id: "mallory".into(),
                display_name: "M".into(),
                account_number: "MACC-6666-0000-0001".into(),
                balance: 0,
                good_standing: true,
            },
            0,
            1000,
        );
        let mut bundle = ma.prepare_invoice(5, 0).unwrap();
        bundle.enc_banking_info = other.enc_banking_info;
        assert_eq!(
            b.verify(&verify_msg(&bundle), 1),
            AckVerdict::Negative(NegativeReason::BankingInfoMismatch)
        );
    }

    #[test]
    fn certificate_codec_round_trip_and_tail_signature() {
        let (_, ma) = enrolled(1000);
        let cert = ma.certificate().unwrap().clone();
        let bytes = cert.encode();
        assert_eq!(MerchantCertificate::decode(&bytes).unwrap(), cert);
        assert_eq!(&bytes[bytes.len() - 32..], &cert.signature);
    }

    #[test]
    fn verdict_codes_round_trip() {
        assert_eq!(AckVerdict::from_code(0), Some(AckVerdict::Positive));
        for r in NegativeReason::ALL {
            let v = AckVerdict::Negative(r);
            assert_eq!(AckVerdict::from_code(v.code()), Some(v));
        }
        assert_eq!(AckVerdict::from_code(200), None);
    }

    #[test]
    fn request_carries_invoice_number() {
        let (_, mut ma) = enrolled(1000);
        let bundle = ma.prepare_invoice(5, 0).unwrap();
        let req = request_merchant_auth(&bundle).unwrap();
        assert_eq!(req.invoice_number, bundle.invoice_number);
        let mut bad = bundle.clone();
        bad.amount = 0;
        assert!(request_merchant_auth(&bad).is_err());
        let mut bad = bundle;
        bad.enc_banking_info.key_role = KeyRole::TicKeyed;
        assert!(request_merchant_auth(&bad).is_err());
    }

    #[test]
    fn verification_gate_and_retry() {
        let (_, mut ma) = enrolled(1000);
        let bundle = ma.prepare_invoice(5, 0).unwrap();
        let req = request_merchant_auth(&bundle).unwrap();
        let mut v = MerchantVerifications::new(10);
        assert_eq!(v.gate("other"), PaymentGate::Direct);
        let first = v.begin(&req, 0);
        assert_eq!(v.gate(&req.invoice_number), PaymentGate::Denied);
        let neg = MerchantVerdictMsg {
            request_id: req.invoice_number.clone(),
            attempt: first.attempt,
            verdict: AckVerdict::Negative(NegativeReason::BadSignature),
        };
        assert_eq!(v.resolve(&neg, 1), Some(neg.verdict));
        assert_eq!(v.gate(&req.invoice_number), PaymentGate::Denied);
        // retry starts over; the stale verdict no longer counts
        let second = v.begin(&req, 2);
        assert_ne!(first.attempt, second.attempt);
        assert_eq!(v.resolve(&neg, 3), None);
        let pos = MerchantVerdictMsg {
            attempt: second.attempt,
            verdict: AckVerdict::Positive,
            ..neg
        };
        assert_eq!(v.resolve(&pos, 3), Some(AckVerdict::Positive));
        match v.gate(&req.invoice_number) {
            PaymentGate::Merchant(t) => {
                assert_eq!(t.amount, 5);
                assert_eq!(t.payee_ref, merchant_payee_ref(&bundle.certificate.account_ref));
            }
            other => panic!("unexpected gate {other:?}"),
        }
        assert_eq!(v.resolve(&pos, 4), None);
    }

    #[test]
    fn verification_times_out() {
        let (_, mut ma) = enrolled(1000);
        let req = request_merchant_auth(&ma.prepare_invoice(5, 0).unwrap()).unwrap();
        let mut v = MerchantVerifications::new(10);
        let m = v.begin(&req, 0);
        assert!(v.expire(10).is_empty());
        let acks = v.expire(11);
        assert_eq!(acks[0].verdict, AckVerdict::Negative(NegativeReason::Timeout));
        let late = MerchantVerdictMsg {
            request_id: m.request_id,
            attempt: m.attempt,
            verdict: AckVerdict::Positive,
        };
        assert_eq!(v.resolve(&late, 12), None);
        assert_eq!(v.gate(&req.invoice_number), PaymentGate::Denied);
    }

    #[test]
    fn late_verdict_before_sweep_is_timeout() {
        let (_, mut ma) = enrolled(1000);
        let req = request_merchant_auth(&ma.prepare_invoice(5, 0).unwrap()).unwrap();
        let mut v = MerchantVerifications::new(10);
        let m = v.begin(&req, 0);
        let late = MerchantVerdictMsg {
            request_id: m.request_id,
            attempt: m.attempt,
            verdict: AckVerdict::Positive,
        };
        assert_eq!(
            v.resolve(&late, 11),
            Some(AckVerdict::Negative(NegativeReason::Timeout))
        );
    }

    #[test]
    fn settlement_is_idempotent_and_conserving() {
        let (mut b, _) = enrolled(1000);
        let before = b.total_funds();
        let notice = SettlementNotice {
            invoice_number: "INV-shop-0001".into(),
            merchant_id: "shop".into(),
            customer_id: "c0ffee".into(),
            amount: 75,
        };
        let c = match b.confirm_receipt("cbank", &notice) {
            NoticeOutcome::Credited(c) => c,
            other => panic!("{other:?}"),
        };
        assert_eq!(
            (c.invoice_number.as_str(), c.customer_id.as_str(), c.amount),
            ("INV-shop-0001", "c0ffee", 75)
        );
        assert_eq!(b.confirm_receipt("cbank", &notice), NoticeOutcome::Duplicate);
        assert_eq!(b.merchant("shop").unwrap().balance, 75);
        assert_eq!(b.clearing_balance("cbank"), -75);
        assert_eq!(b.total_funds(), before);
    }
}
