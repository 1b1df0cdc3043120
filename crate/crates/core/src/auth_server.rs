//! The customer bank's authentication server.
//!
//! A session moves strictly forward through
//! `LoggedIn → ModeSelected → AwaitingTic → AwaitingSms → Closed`, and may
//! jump to `Closed` from anywhere. Money moves only in
//! [`AuthServer::handle_sms_reply`], and only for a transaction whose TIC was
//! accepted and whose owner answered YES before the deadline.
//!
//! Every submission failure looks identical from outside
//! ([`GENERIC_DENIAL`]); the precise cause goes to the internal event log.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::crypto::{generate_secret_key, Ciphertext, HybridCrypto, Pin, SecretKey, WrappedKey};
use crate::digest::sha256;
use crate::order::{PaymentMode, PaymentOrder};
use crate::tic_registry::{Rejection, TicBatch, TicError, TicPolicy, TicRegistry, Verification};
use crate::SimTime;

/// The one error text a customer ever sees for a failed submission.
pub const GENERIC_DENIAL: &str = "transaction denied";

pub const CLEARING_EXTERNAL: &str = "clearing:external";

pub fn interbank_clearing(bank_id: &str) -> String {
    format!("clearing:interbank:{bank_id}")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerConfig {
    pub sms_timeout: SimTime,
    pub lockout_threshold: u32,
    pub tic_policy: TicPolicy,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            sms_timeout: 300,
            lockout_threshold: 5,
            tic_policy: TicPolicy::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AccountRecord {
    pub account_id: String,
    pub username: String,
    salt: [u8; 32],
    verifier: [u8; 32],
    pub pin: Pin,
    pub cell_number: String,
    pub balance: i64,
}

impl AccountRecord {
    pub fn new(
        account_id: impl Into<String>,
        username: impl Into<String>,
        password: &str,
        pin: Pin,
        cell_number: impl Into<String>,
        balance: i64,
    ) -> Self {
        let account_id = account_id.into();
        let username = username.into();
        let salt = sha256(&[b"password-salt", account_id.as_bytes(), username.as_bytes()]);
        Self {
            verifier: sha256(&[&salt, password.as_bytes()]),
            salt,
            account_id,
            username,
            pin,
            cell_number: cell_number.into(),
            balance,
        }
    }

    pub fn check_password(&self, password: &str) -> bool {
        sha256(&[&self.salt, password.as_bytes()]) == self.verifier
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    LoggedIn,
    ModeSelected(PaymentMode),
    AwaitingTic,
    AwaitingSms,
    Closed,
}

impl Phase {
    pub fn rank(self) -> u8 {
        match self {
            Phase::LoggedIn => 0,
            Phase::ModeSelected(_) => 1,
            Phase::AwaitingTic => 2,
            Phase::AwaitingSms => 3,
            Phase::Closed => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::LoggedIn => "logged-in",
            Phase::ModeSelected(_) => "mode-selected",
            Phase::AwaitingTic => "awaiting-tic",
            Phase::AwaitingSms => "awaiting-sms",
            Phase::Closed => "closed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SessionContext {
    pub session_id: String,
    pub cookie_token: String,
    pub account_id: String,
    pub secret_key: SecretKey,
    pub phase: Phase,
    pub created_at: SimTime,
    /// Every phase this session has been in, in order.
    pub history: Vec<Phase>,
}

impl SessionContext {
    fn advance(&mut self, next: Phase) {
        debug_assert!(
            next == Phase::Closed || next.rank() == self.phase.rank() + 1,
            "phase skip {:?} -> {:?}",
            self.phase,
            next
        );
        if self.phase != Phase::Closed {
            self.phase = next;
            self.history.push(next);
        }
    }
}

/// The terms a merchant flow fixes before any payment data moves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvoiceTerms {
    pub invoice_number: String,
    pub amount: u64,
    pub payee_ref: String,
    pub merchant_id: String,
    pub merchant_bank_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PaymentGate {
    /// Plain one-way transfer.
    Direct,
    /// Merchant flow with a positive merchant verification on record.
    Merchant(InvoiceTerms),
    /// Merchant flow without a positive verification; nothing may be consumed.
    Denied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmsDecision {
    Yes,
    No,
}

impl SmsDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            SmsDecision::Yes => "YES",
            SmsDecision::No => "NO",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "YES" => Some(SmsDecision::Yes),
            "NO" => Some(SmsDecision::No),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortReason {
    Declined,
    Timeout,
    SessionClosed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TxnState {
    Pending,
    Committed,
    Aborted(AbortReason),
}

impl TxnState {
    pub fn is_final(self) -> bool {
        self != TxnState::Pending
    }
}

#[derive(Clone, Debug)]
pub struct PendingTransaction {
    pub txn_id: String,
    pub session_id: String,
    pub account_id: String,
    pub order: PaymentOrder,
    pub tic_digest: String,
    pub sms_sent_at: SimTime,
    pub expiry_deadline: SimTime,
    pub terms: Option<InvoiceTerms>,
    pub state: TxnState,
    pub reply: Option<(SmsDecision, SimTime)>,
}

#[derive(Clone, Debug)]
pub struct LoginResponse {
    pub session_id: String,
    pub cookie_token: String,
    pub wrapped_secret: WrappedKey,
    pub welcome: String,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum LoginRejection {
    #[error("bad credentials")]
    BadCredentials,
    #[error("account locked")]
    LockedOut,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ModeRejection {
    #[error("unknown session")]
    UnknownSession,
    #[error("wrong phase")]
    WrongPhase,
}

/// Internal cause of a denied submission. Never sent to the client.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCause {
    UnknownSession,
    WrongPhase,
    MalformedSubmission,
    TicDecryptFailed,
    TicRejected(Rejection),
    OrderDecryptFailed,
    MerchantGateDenied,
    MerchantTermsMismatch,
}

#[derive(Clone, Debug)]
pub struct SubmitRejected {
    pub cause: FailureCause,
    /// Set when closing the session aborted a transaction awaiting SMS.
    pub aborted: Option<TxnOutcome>,
}

impl SubmitRejected {
    /// What the client sees, identical for every cause.
    pub fn public_message(&self) -> &'static str {
        GENERIC_DENIAL
    }
}

#[derive(Clone, Debug)]
pub struct SmsDispatch {
    pub txn_id: String,
    pub session_id: String,
    pub cell_number: String,
    pub amount: u64,
    pub text: String,
    pub deadline: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxnOutcome {
    pub txn_id: String,
    pub session_id: String,
    pub account_id: String,
    pub amount: u64,
    pub state: TxnState,
    pub terms: Option<InvoiceTerms>,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SmsReplyError {
    #[error("unknown transaction")]
    UnknownTxn,
    #[error("transaction already final")]
    AlreadyFinal,
    #[error("reply from a number not on record")]
    WrongSender,
}

/// Internal audit record, drained by whoever drives the server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerEvent {
    pub session_id: Option<String>,
    pub label: &'static str,
    pub detail: String,
}

pub trait LoginService {
    fn login(&mut self, username: &str, password: &str, now: SimTime) -> Result<LoginResponse, LoginRejection>;
}

#[derive(Debug)]
pub struct AuthServer {
    config: ServerConfig,
    crypto: HybridCrypto,
    registry: TicRegistry,
    accounts: BTreeMap<String, AccountRecord>,
    by_username: BTreeMap<String, String>,
    failures: BTreeMap<String, u32>,
    sessions: BTreeMap<String, SessionContext>,
    cookies: BTreeMap<String, String>,
    txns: BTreeMap<String, PendingTransaction>,
    clearing: BTreeMap<String, i64>,
    rng: ChaCha20Rng,
    next_session: u64,
    next_txn: u64,
    events: Vec<ServerEvent>,
}

impl AuthServer {
    pub fn new(config: ServerConfig, crypto: HybridCrypto, seed: u64) -> Self {
        Self {
            registry: TicRegistry::new(config.tic_policy),
            config,
            crypto,
            accounts: BTreeMap::new(),
            by_username: BTreeMap::new(),
            failures: BTreeMap::new(),
            sessions: BTreeMap::new(),
            cookies: BTreeMap::new(),
            txns: BTreeMap::new(),
            clearing: BTreeMap::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            next_session: 1,
            next_txn: 1,
            events: Vec::new(),
        }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn add_account(&mut self, record: AccountRecord) {
        self.by_username
            .insert(record.username.clone(), record.account_id.clone());
        self.accounts.insert(record.account_id.clone(), record);
    }

    pub fn account(&self, account_id: &str) -> Option<&AccountRecord> {
        self.accounts.get(account_id)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &AccountRecord> {
        self.accounts.values()
    }

    pub fn registry(&self) -> &TicRegistry {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut TicRegistry {
        &mut self.registry
    }

    pub fn issue_tics(&mut self, account_id: &str, count: usize, seed: u64, now: SimTime) -> Result<TicBatch, TicError> {
        let batch = self.registry.generate_tics(account_id, count, seed, now)?;
        self.log(None, "tics-issued", format!("{} x{}", batch.batch_id, count));
        Ok(batch)
    }

    pub fn session(&self, cookie: &str) -> Option<&SessionContext> {
        self.cookies.get(cookie).and_then(|id| self.sessions.get(id))
    }

    pub fn session_by_id(&self, session_id: &str) -> Option<&SessionContext> {
        self.sessions.get(session_id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &SessionContext> {
        self.sessions.values()
    }

    pub fn live_sessions(&self) -> usize {
        self.sessions
            .values()
            .filter(|s| s.phase != Phase::Closed)
            .count()
    }

    pub fn transaction(&self, txn_id: &str) -> Option<&PendingTransaction> {
        self.txns.get(txn_id)
    }

    pub fn transactions(&self) -> impl Iterator<Item = &PendingTransaction> {
        self.txns.values()
    }

    pub fn clearing_balance(&self, name: &str) -> i64 {
        self.clearing.get(name).copied().unwrap_or(0)
    }

    pub fn clearing_accounts(&self) -> impl Iterator<Item = (&String, &i64)> {
        self.clearing.iter()
    }

    /// Customer balances plus clearing positions. Constant across any run.
    pub fn total_funds(&self) -> i64 {
        self.accounts.values().map(|a| a.balance).sum::<i64>() + self.clearing.values().sum::<i64>()
    }

    pub fn drain_events(&mut self) -> Vec<ServerEvent> {
        std::mem::take(&mut self.events)
    }

    fn log(&mut self, session_id: Option<&str>, label: &'static str, detail: impl Into<String>) {
        self.events.push(ServerEvent {
            session_id: session_id.map(str::to_string),
            label,
            detail: detail.into(),
        });
    }

    fn set_phase(&mut self, session_id: &str, phase: Phase) {
        if let Some(s) = self.sessions.get_mut(session_id) {
            if s.phase == Phase::Closed {
                return;
            }
            s.advance(phase);
            self.log(Some(session_id), "phase", phase.label());
        }
    }

    fn fresh_cookie(&mut self) -> String {
        loop {
            let mut raw = [0u8; 16];
            self.rng.fill_bytes(&mut raw);
            let cookie = hex::encode(raw);
            if !self.cookies.contains_key(&cookie) {
                return cookie;
            }
        }
    }

    pub fn login(&mut self, username: &str, password: &str, now: SimTime) -> Result<LoginResponse, LoginRejection> {
        let failures = self.failures.get(username).copied().unwrap_or(0);
        if failures >= self.config.lockout_threshold {
            self.log(None, "login-rejected", "locked-out");
            return Err(LoginRejection::LockedOut);
        }
        let account = self
            .by_username
            .get(username)
            .and_then(|id| self.accounts.get(id))
            .filter(|a| a.check_password(password));
        let Some(account) = account else {
            *self.failures.entry(username.to_string()).or_default() += 1;
            self.log(None, "login-rejected", "bad-credentials");
            return Err(LoginRejection::BadCredentials);
        };
        let account_id = account.account_id.clone();
        let pin = account.pin;
        self.failures.remove(username);

        let session_id = format!("S{}", self.next_session);
        self.next_session += 1;
        let cookie_token = self.fresh_cookie();
        let secret_key = generate_secret_key(&session_id, self.rng.next_u64());
        let wrapped_secret = self.crypto.wrap_secret_key(&secret_key, pin);

        self.cookies.insert(cookie_token.clone(), session_id.clone());
        self.sessions.insert(
            session_id.clone(),
            SessionContext {
                session_id: session_id.clone(),
                cookie_token: cookie_token.clone(),
                account_id,
                secret_key,
                phase: Phase::LoggedIn,
                created_at: now,
                history: vec![Phase::LoggedIn],
            },
        );
        self.log(Some(&session_id), "basic-auth-verified", username);
        self.log(Some(&session_id), "phase", Phase::LoggedIn.label());

        let modes: Vec<&str> = PaymentMode::ALL.iter().map(|m| m.as_str()).collect();
        Ok(LoginResponse {
            welcome: format!(
                "Welcome {username}. Session {cookie_token}. Payment modes: {}",
                modes.join(", ")
            ),
            session_id,
            cookie_token,
            wrapped_secret,
        })
    }

    pub fn select_mode(&mut self, cookie: Option<&str>, mode: PaymentMode) -> Result<(), ModeRejection> {
        let Some(session) = cookie.and_then(|c| self.session(c)) else {
            return Err(ModeRejection::UnknownSession);
        };
        if session.phase != Phase::LoggedIn {
            return Err(ModeRejection::WrongPhase);
        }
        let id = session.session_id.clone();
        self.set_phase(&id, Phase::ModeSelected(mode));
        self.set_phase(&id, Phase::AwaitingTic);
        Ok(())
    }

    /// Closes the session behind `cookie` (if any) and denies the submission.
    pub fn deny(&mut self, cookie: Option<&str>, cause: FailureCause, now: SimTime) -> SubmitRejected {
        let session_id = cookie
            .and_then(|c| self.cookies.get(c))
            .cloned();
        self.log(
            session_id.as_deref(),
            "submit-denied",
            serde_json::to_string(&cause).expect("serializable"),
        );
        let aborted = session_id.and_then(|id| self.close_session(&id, now));
        SubmitRejected { cause, aborted }
    }

    /// Marks the session closed; a transaction still awaiting SMS is aborted.
    pub fn close_session(&mut self, session_id: &str, _now: SimTime) -> Option<TxnOutcome> {
        self.set_phase(session_id, Phase::Closed);
        let txn_id = self
            .txns
            .values()
            .find(|t| t.session_id == session_id && t.state == TxnState::Pending)
            .map(|t| t.txn_id.clone())?;
        Some(self.finish(&txn_id, TxnState::Aborted(AbortReason::SessionClosed)))
    }

    pub fn submit_payment(
        &mut self,
        cookie: Option<&str>,
        enc_tic: &Ciphertext,
        enc_order: &Ciphertext,
        gate: &PaymentGate,
        now: SimTime,
    ) -> Result<SmsDispatch, SubmitRejected> {
        let Some(session) = cookie.and_then(|c| self.session(c)) else {
            return Err(self.deny(cookie, FailureCause::UnknownSession, now));
        };
        if session.phase != Phase::AwaitingTic {
            return Err(self.deny(cookie, FailureCause::WrongPhase, now));
        }
        if *gate == PaymentGate::Denied {
            return Err(self.deny(cookie, FailureCause::MerchantGateDenied, now));
        }
        let session_id = session.session_id.clone();
        let account_id = session.account_id.clone();

        let tic = match self
            .crypto
            .decrypt_tic(enc_tic, &session.secret_key, &self.config.tic_policy)
        {
            Ok(tic) => tic,
            Err(_) => return Err(self.deny(cookie, FailureCause::TicDecryptFailed, now)),
        };
        if let Verification::Rejected(r) = self.registry.verify_and_consume(&account_id, &tic, now) {
            return Err(self.deny(cookie, FailureCause::TicRejected(r), now));
        }
        self.log(Some(&session_id), "tic-verified", tic.digest());

        // The TIC is cancelled for future use but still keys this order.
        let order = match self.crypto.decrypt_payment(enc_order, &tic, &session_id) {
            Ok(order) => order,
            Err(_) => return Err(self.deny(cookie, FailureCause::OrderDecryptFailed, now)),
        };
        let terms = match gate {
            PaymentGate::Merchant(terms) => {
                let matches = order.invoice_number.as_deref() == Some(terms.invoice_number.as_str())
                    && order.amount == terms.amount
                    && order.payee_account == terms.payee_ref;
                if !matches {
                    return Err(self.deny(cookie, FailureCause::MerchantTermsMismatch, now));
                }
                Some(terms.clone())
            }
            _ => None,
        };

        let txn_id = format!("T{}", self.next_txn);
        self.next_txn += 1;
        let deadline = now + self.config.sms_timeout;
        let cell_number = self.accounts[&account_id].cell_number.clone();
        let masked: String = {
            let chars: Vec<char> = order.payee_account.chars().collect();
            chars[chars.len().saturating_sub(4)..].iter().collect()
        };
        let text = format!(
            "Confirm {} payment of {} to ****{} (ref {txn_id})? Reply YES or NO",
            order.mode, order.amount, masked
        );
        self.txns.insert(
            txn_id.clone(),
            PendingTransaction {
                txn_id: txn_id.clone(),
                session_id: session_id.clone(),
                account_id,
                tic_digest: tic.digest(),
                sms_sent_at: now,
                expiry_deadline: deadline,
                terms,
                state: TxnState::Pending,
                reply: None,
                order,
            },
        );
        self.set_phase(&session_id, Phase::AwaitingSms);
        self.log(Some(&session_id), "sms-dispatched", txn_id.clone());
        Ok(SmsDispatch {
            amount: self.txns[&txn_id].order.amount,
            txn_id,
            session_id,
            cell_number,
            text,
            deadline,
        })
    }

    pub fn handle_sms_reply(
        &mut self,
        txn_id: &str,
        decision: SmsDecision,
        from_cell: &str,
        now: SimTime,
    ) -> Result<TxnOutcome, SmsReplyError> {
        let txn = self.txns.get(txn_id).ok_or(SmsReplyError::UnknownTxn)?;
        if self.accounts[&txn.account_id].cell_number != from_cell {
            return Err(SmsReplyError::WrongSender);
        }
        if txn.state.is_final() {
            return Err(SmsReplyError::AlreadyFinal);
        }
        let deadline = txn.expiry_deadline;
        self.txns.get_mut(txn_id).expect("present").reply = Some((decision, now));
        let state = if now > deadline {
            TxnState::Aborted(AbortReason::Timeout)
        } else if decision == SmsDecision::Yes {
            TxnState::Committed
        } else {
            TxnState::Aborted(AbortReason::Declined)
        };
        Ok(self.finish(txn_id, state))
    }

    /// Aborts every pending transaction whose deadline is behind `now`.
    pub fn expire_pending(&mut self, now: SimTime) -> Vec<TxnOutcome> {
        let stale: Vec<String> = self
            .txns
            .values()
            .filter(|t| t.state == TxnState::Pending && t.expiry_deadline < now)
            .map(|t| t.txn_id.clone())
            .collect();
        stale
            .into_iter()
            .map(|id| self.finish(&id, TxnState::Aborted(AbortReason::Timeout)))
            .collect()
    }

    fn finish(&mut self, txn_id: &str, state: TxnState) -> TxnOutcome {
        let txn = self.txns.get_mut(txn_id).expect("known txn");
        txn.state = state;
        let txn = txn.clone();
        if state == TxnState::Committed {
            let amount = txn.order.amount as i64;
            self.accounts
                .get_mut(&txn.account_id)
                .expect("payer exists")
                .balance -= amount;
            match &txn.terms {
                Some(terms) => {
                    *self
                        .clearing
                        .entry(interbank_clearing(&terms.merchant_bank_id))
                        .or_default() += amount;
                }
                None => match self.accounts.get_mut(&txn.order.payee_account) {
                    Some(payee) => payee.balance += amount,
                    None => *self.clearing.entry(CLEARING_EXTERNAL.to_string()).or_default() += amount,
                },
            }
            self.log(Some(&txn.session_id), "committed", txn_id);
        } else {
            self.log(
                Some(&txn.session_id),
                "aborted",
                format!("{txn_id} {}", serde_json::to_string(&state).expect("serializable")),
            );
        }
        self.set_phase(&txn.session_id, Phase::Closed);
        TxnOutcome {
            txn_id: txn.txn_id,
            session_id: txn.session_id,
            account_id: txn.account_id,
            amount: txn.order.amount,
            state,
            terms: txn.terms,
        }
    }
}

impl LoginService for AuthServer {
    fn login(&mut self, username: &str, password: &str, now: SimTime) -> Result<LoginResponse, LoginRejection> {
        AuthServer::login(self, username, password, now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::CipherKind;
    use crate::tic_registry::TicCode;

    const PIN: Pin = Pin::new_const(0x1122_3344_5566_7788);

    struct Fixture {
        server: AuthServer,
        client: HybridCrypto,
        tics: Vec<TicCode>,
    }

    fn fixture() -> Fixture {
        let mut server = AuthServer::new(
            ServerConfig::default(),
            HybridCrypto::new(CipherKind::ChaCha20Poly1305, 1),
            99,
        );
        server.add_account(AccountRecord::new("ACCT-0001-4411", "alice", "pw", PIN, "+4790000001", 10_000));
        server.add_account(AccountRecord::new("ACCT-0002-9876", "bob", "pw2", Pin::new(5), "+4790000002", 500));
        let tics = server.issue_tics("ACCT-0001-4411", 3, 1, 0).unwrap().codes;
        Fixture {
            server,
            client: HybridCrypto::new(CipherKind::ChaCha20Poly1305, 2),
            tics,
        }
    }

    fn order() -> PaymentOrder {
        PaymentOrder::transfer("ACCT-0002-9876", 250)
    }

    /// Logs in, selects a mode and submits with `tic`; returns cookie and result.
    fn submit(f: &mut Fixture, tic: &TicCode) -> (String, Result<SmsDispatch, SubmitRejected>) {
        let resp = f.server.login("alice", "pw", 0).unwrap();
        let key = f
            .client
            .unwrap_secret_key(&resp.wrapped_secret, PIN, &resp.session_id)
            .unwrap();
        f.server
            .select_mode(Some(&resp.cookie_token), PaymentMode::ElectronicTransfer)
            .unwrap();
        let enc_tic = f.client.encrypt_tic(tic, &key);
        let enc_order = f.client.encrypt_payment(&order(), tic, &resp.session_id);
        let res = f.server.submit_payment(
            Some(&resp.cookie_token),
            &enc_tic,
            &enc_order,
            &PaymentGate::Direct,
            1,
        );
        (resp.cookie_token, res)
    }

    #[test]
    fn login_creates_one_session() {
        let mut f = fixture();
        let resp = f.server.login("alice", "pw", 0).unwrap();
        assert_eq!(f.server.live_sessions(), 1);
        assert_eq!(f.server.session(&resp.cookie_token).unwrap().phase, Phase::LoggedIn);
        assert!(resp.welcome.contains(&resp.cookie_token));
    }

    #[test]
    fn wrong_password_creates_nothing() {
        let mut f = fixture();
        assert_eq!(f.server.login("alice", "nope", 0).unwrap_err(), LoginRejection::BadCredentials);
        assert_eq!(f.server.login("mallory", "pw", 0).unwrap_err(), LoginRejection::BadCredentials);
        assert_eq!(f.server.sessions().count(), 0);
    }

    #[test]
    fn lockout_after_five_failures() {
        let mut f = fixture();
        for _ in 0..5 {
            assert_eq!(f.server.login("alice", "x", 0).unwrap_err(), LoginRejection::BadCredentials);
        }
        assert_eq!(f.server.login("alice", "pw", 0).unwrap_err(), LoginRejection::LockedOut);
        // other users are unaffected
        assert!(f.server.login("bob", "pw2", 0).is_ok());
    }

    #[test]
    fn success_resets_failure_count() {
        let mut f = fixture();
        for _ in 0..4 {
            f.server.login("alice", "x", 0).unwrap_err();
        }
        f.server.login("alice", "pw", 0).unwrap();
        for _ in 0..4 {
            f.server.login("alice", "x", 0).unwrap_err();
        }
        assert!(f.server.login("alice", "pw", 0).is_ok());
    }

    #[test]
    fn two_logins_distinct_cookies_and_keys() {
        let mut f = fixture();
        let a = f.server.login("alice", "pw", 0).unwrap();
        let b = f.server.login("alice", "pw", 0).unwrap();
        assert_ne!(a.cookie_token, b.cookie_token);
        let ka = &f.server.session(&a.cookie_token).unwrap().secret_key;
        let kb = &f.server.session(&b.cookie_token).unwrap().secret_key;
        assert_ne!(ka.bytes(), kb.bytes());
    }

    #[test]
    fn select_mode_phases() {
        let mut f = fixture();
        let resp = f.server.login("alice", "pw", 0).unwrap();
        let cookie = Some(resp.cookie_token.as_str());
        f.server.select_mode(cookie, PaymentMode::CreditCard).unwrap();
        let s = f.server.session(&resp.cookie_token).unwrap();
        assert_eq!(s.phase, Phase::AwaitingTic);
        assert_eq!(
            s.history,
            vec![Phase::LoggedIn, Phase::ModeSelected(PaymentMode::CreditCard), Phase::AwaitingTic]
        );
        assert_eq!(
            f.server.select_mode(cookie, PaymentMode::CreditCard),
            Err(ModeRejection::WrongPhase)
        );
        assert_eq!(
            f.server.select_mode(Some("feed"), PaymentMode::CreditCard),
            Err(ModeRejection::UnknownSession)
        );
        assert_eq!(
            f.server.select_mode(None, PaymentMode::CreditCard),
            Err(ModeRejection::UnknownSession)
        );
    }

    #[test]
    fn happy_submit_consumes_tic() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let (cookie, res) = submit(&mut f, &tic);
        let sms = res.unwrap();
        assert_eq!(sms.cell_number, "+4790000001");
        assert_eq!(sms.deadline, 301);
        assert!(!sms.text.contains("ACCT-0002-9876"));
        assert_eq!(
            f.server.registry().record(&tic).unwrap().state,
            crate::tic_registry::TicState::Consumed
        );
        assert_eq!(f.server.session(&cookie).unwrap().phase, Phase::AwaitingSms);
    }

    #[test]
    fn replayed_submission_is_denied() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let resp = f.server.login("alice", "pw", 0).unwrap();
        let key = f.client.unwrap_secret_key(&resp.wrapped_secret, PIN, &resp.session_id).unwrap();
        let cookie = Some(resp.cookie_token.as_str());
        f.server.select_mode(cookie, PaymentMode::DebitCard).unwrap();
        let enc_tic = f.client.encrypt_tic(&tic, &key);
        let enc_order = f.client.encrypt_payment(&order(), &tic, &resp.session_id);
        f.server
            .submit_payment(cookie, &enc_tic, &enc_order, &PaymentGate::Direct, 1)
            .unwrap();
        let err = f
            .server
            .submit_payment(cookie, &enc_tic, &enc_order, &PaymentGate::Direct, 2)
            .unwrap_err();
        assert_eq!(err.cause, FailureCause::WrongPhase);
        assert_eq!(err.public_message(), GENERIC_DENIAL);
        // closing the session took the pending transaction down with it
        assert_eq!(
            err.aborted.unwrap().state,
            TxnState::Aborted(AbortReason::SessionClosed)
        );
    }

    #[test]
    fn reused_tic_in_new_session_is_rejected_as_already_used() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let (_, first) = submit(&mut f, &tic);
        let sms = first.unwrap();
        f.server.handle_sms_reply(&sms.txn_id, SmsDecision::Yes, "+4790000001", 5).unwrap();
        let (cookie, second) = submit(&mut f, &tic);
        let err = second.unwrap_err();
        assert_eq!(err.cause, FailureCause::TicRejected(Rejection::AlreadyUsed));
        assert_eq!(f.server.session(&cookie).unwrap().phase, Phase::Closed);
    }

    #[test]
    fn tampered_order_leaves_no_pending_transaction() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let resp = f.server.login("alice", "pw", 0).unwrap();
        let key = f.client.unwrap_secret_key(&resp.wrapped_secret, PIN, &resp.session_id).unwrap();
        let cookie = Some(resp.cookie_token.as_str());
        f.server.select_mode(cookie, PaymentMode::DebitCard).unwrap();
        let enc_tic = f.client.encrypt_tic(&tic, &key);
        let mut enc_order = f.client.encrypt_payment(&order(), &tic, &resp.session_id);
        enc_order.body[3] ^= 0x10;
        let err = f
            .server
            .submit_payment(cookie, &enc_tic, &enc_order, &PaymentGate::Direct, 1)
            .unwrap_err();
        assert_eq!(err.cause, FailureCause::OrderDecryptFailed);
        assert_eq!(f.server.transactions().count(), 0);
    }

    #[test]
    fn denied_gate_consumes_nothing() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let resp = f.server.login("alice", "pw", 0).unwrap();
        let key = f.client.unwrap_secret_key(&resp.wrapped_secret, PIN, &resp.session_id).unwrap();
        let cookie = Some(resp.cookie_token.as_str());
        f.server.select_mode(cookie, PaymentMode::DebitCard).unwrap();
        let err = f
            .server
            .submit_payment(
                cookie,
                &f.client.encrypt_tic(&tic, &key),
                &f.client.encrypt_payment(&order(), &tic, &resp.session_id),
                &PaymentGate::Denied,
                1,
            )
            .unwrap_err();
        assert_eq!(err.cause, FailureCause::MerchantGateDenied);
        assert_eq!(
            f.server.registry().record(&tic).unwrap().state,
            crate::tic_registry::TicState::Issued
        );
    }

    #[test]
    fn yes_commits_and_moves_funds() {
        let mut f = fixture();
        let before = f.server.total_funds();
        let tic = f.tics[0].clone();
        let sms = submit(&mut f, &tic).1.unwrap();
        let out = f
            .server
            .handle_sms_reply(&sms.txn_id, SmsDecision::Yes, "+4790000001", 100)
            .unwrap();
        assert_eq!(out.state, TxnState::Committed);
        assert_eq!(f.server.account("ACCT-0001-4411").unwrap().balance, 10_000 - 250);
        assert_eq!(f.server.account("ACCT-0002-9876").unwrap().balance, 500 + 250);
        assert_eq!(f.server.total_funds(), before);
        assert_eq!(
            f.server.handle_sms_reply(&sms.txn_id, SmsDecision::Yes, "+4790000001", 101),
            Err(SmsReplyError::AlreadyFinal)
        );
    }

    #[test]
    fn no_aborts_without_balance_change() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let sms = submit(&mut f, &tic).1.unwrap();
        let out = f
            .server
            .handle_sms_reply(&sms.txn_id, SmsDecision::No, "+4790000001", 2)
            .unwrap();
        assert_eq!(out.state, TxnState::Aborted(AbortReason::Declined));
        assert_eq!(f.server.account("ACCT-0001-4411").unwrap().balance, 10_000);
        assert_eq!(f.server.account("ACCT-0002-9876").unwrap().balance, 500);
    }

    #[test]
    fn yes_after_deadline_aborts() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let sms = submit(&mut f, &tic).1.unwrap();
        // exactly at the deadline still counts
        let mut g = fixture();
        let tic_g = g.tics[0].clone();
        let sms_g = submit(&mut g, &tic_g).1.unwrap();
        assert_eq!(
            g.server
                .handle_sms_reply(&sms_g.txn_id, SmsDecision::Yes, "+4790000001", sms_g.deadline)
                .unwrap()
                .state,
            TxnState::Committed
        );
        let out = f
            .server
            .handle_sms_reply(&sms.txn_id, SmsDecision::Yes, "+4790000001", sms.deadline + 1)
            .unwrap();
        assert_eq!(out.state, TxnState::Aborted(AbortReason::Timeout));
        assert_eq!(f.server.account("ACCT-0001-4411").unwrap().balance, 10_000);
    }

    #[test]
    fn expire_pending_aborts_stale() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let sms = submit(&mut f, &tic).1.unwrap();
        assert!(f.server.expire_pending(sms.deadline).is_empty());
        let out = f.server.expire_pending(sms.deadline + 1);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].state, TxnState::Aborted(AbortReason::Timeout));
        assert!(f.server.expire_pending(sms.deadline + 2).is_empty());
    }

    #[test]
    fn spoofed_or_unknown_replies() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let sms = submit(&mut f, &tic).1.unwrap();
        assert_eq!(
            f.server.handle_sms_reply(&sms.txn_id, SmsDecision::Yes, "+4790000002", 2),
            Err(SmsReplyError::WrongSender)
        );
        assert_eq!(
            f.server.handle_sms_reply("T999", SmsDecision::Yes, "+4790000001", 2),
            Err(SmsReplyError::UnknownTxn)
        );
        assert_eq!(f.server.transaction(&sms.txn_id).unwrap().state, TxnState::Pending);
    }

    #[test]
    fn external_payee_goes_to_clearing() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let resp = f.server.login("alice", "pw", 0).unwrap();
        let key = f.client.unwrap_secret_key(&resp.wrapped_secret, PIN, &resp.session_id).unwrap();
        let cookie = Some(resp.cookie_token.as_str());
        f.server.select_mode(cookie, PaymentMode::CreditCard).unwrap();
        let ext = PaymentOrder::transfer("EXT-5555-0000-1234", 40);
        let sms = f
            .server
            .submit_payment(
                cookie,
                &f.client.encrypt_tic(&tic, &key),
                &f.client.encrypt_payment(&ext, &tic, &resp.session_id),
                &PaymentGate::Direct,
                1,
            )
            .unwrap();
        let before = f.server.total_funds();
        f.server.handle_sms_reply(&sms.txn_id, SmsDecision::Yes, "+4790000001", 2).unwrap();
        assert_eq!(f.server.clearing_balance(CLEARING_EXTERNAL), 40);
        assert_eq!(f.server.total_funds(), before);
    }

    #[test]
    fn merchant_terms_must_match_order() {
        let mut f = fixture();
        let tic = f.tics[0].clone();
        let resp = f.server.login("alice", "pw", 0).unwrap();
        let key = f.client.unwrap_secret_key(&resp.wrapped_secret, PIN, &resp.session_id).unwrap();
        let cookie = Some(resp.cookie_token.as_str());
        f.server.select_mode(cookie, PaymentMode::CreditCard).unwrap();
        let terms = InvoiceTerms {
            invoice_number: "INV-1".into(),
            amount: 999,
            payee_ref: "ref:abc".into(),
            merchant_id: "shop".into(),
            merchant_bank_id: "mbank".into(),
        };
        let mut o = PaymentOrder::transfer("ref:abc", 998);
        o.invoice_number = Some("INV-1".into());
        let err = f
            .server
            .submit_payment(
                cookie,
                &f.client.encrypt_tic(&tic, &key),
                &f.client.encrypt_payment(&o, &tic, &resp.session_id),
                &PaymentGate::Merchant(terms),
                1,
            )
            .unwrap_err();
        assert_eq!(err.cause, FailureCause::MerchantTermsMismatch);
    }

    #[test]
    fn failure_causes_share_one_public_message() {
        let causes = [
            FailureCause::UnknownSession,
            FailureCause::WrongPhase,
            FailureCause::TicDecryptFailed,
            FailureCause::TicRejected(Rejection::Unknown),
            FailureCause::OrderDecryptFailed,
        ];
        let mut f = fixture();
        let msgs: Vec<&str> = causes
            .iter()
            .map(|c| f.server.deny(None, *c, 0).public_message())
            .collect();
        assert!(msgs.iter().all(|m| *m == GENERIC_DENIAL));
    }
}
