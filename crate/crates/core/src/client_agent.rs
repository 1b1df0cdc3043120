//! The customer agent on the handset.
//!
//! Two pieces live here:
//!
//! - [`Vault`], the password-protected local store of issued TICs. A picked
//!   code is removed from the store before it is used.
//! - [`ClientAgent`], the client half of the one-way protocol: login, PIN
//!   unwrap of the session key, payment composition and SMS confirmation.
//!
//! Vault file layout:
//!
//! ```text
//! version (1B) ‖ salt (16B) ‖ iterations (4B, BE) ‖ verifier (16B)
//!   ‖ entry count (2B, BE) ‖ { entry length (4B, BE) ‖ sealed entry }*
//! ```
//!
//! The KDF is PBKDF2-HMAC-SHA256 with a deliberately small iteration count so
//! simulations stay fast. Do not reuse these parameters outside a simulator.

use std::collections::BTreeMap;

use hmac::{Hmac, Mac};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;
use thiserror::Error;

use crate::auth_server::{LoginRejection, LoginResponse, LoginService, SmsDecision};
use crate::crypto::{Binding, Ciphertext, CryptoError, HybridCrypto, KeyBytes, KeyRole, Pin, SecretKey, KEY_LEN};
use crate::digest::sha256;
use crate::order::{PaymentMode, PaymentOrder};
use crate::tic_registry::{TicBatch, TicCode, TicPolicy};
use crate::SimTime;

pub const VAULT_VERSION: u8 = 1;
pub const SALT_LEN: usize = 16;
pub const VERIFIER_LEN: usize = 16;
pub const DEFAULT_KDF_ITERATIONS: u32 = 1024;

const VAULT_BINDING: &str = "vault";
const VAULT_PURPOSE: &str = "vault-entry";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VaultError {
    #[error("vault is locked: wrong password")]
    Locked,
    #[error("vault is empty; new TICs must be obtained from the bank")]
    Empty,
    #[error("cannot provision an empty batch")]
    EmptyBatch,
    #[error("too many entries for one vault")]
    TooManyEntries,
    #[error("malformed vault: {0}")]
    Malformed(&'static str),
}

/// Which stored code to hand out next.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PickPolicy {
    /// Oldest entry first. Keeps traces reproducible.
    #[default]
    FirstIssued,
    /// Entry `draw % len`, for randomized tests.
    Uniform(u64),
}

#[derive(Clone, PartialEq, Eq)]
pub struct Vault {
    salt: [u8; SALT_LEN],
    iterations: u32,
    verifier: [u8; VERIFIER_LEN],
    entries: Vec<Vec<u8>>,
    policy: TicPolicy,
}

impl std::fmt::Debug for Vault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Vault")
            .field("entries", &self.entries.len())
            .field("iterations", &self.iterations)
            .finish_non_exhaustive()
    }
}

type HmacSha256 = Hmac<Sha256>;

fn password_key(password: &str, salt: &[u8; SALT_LEN], iterations: u32) -> KeyBytes {
    let mut key = [0u8; KEY_LEN];
    pbkdf2::pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, iterations, &mut key);
    key
}

fn verifier_mac(key: &KeyBytes) -> HmacSha256 {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(key).expect("any key length");
    mac.update(b"vault-verifier");
    mac
}

fn salt_from_seed(seed: u64) -> [u8; SALT_LEN] {
    let d = sha256(&[b"vault-salt", &seed.to_be_bytes()]);
    d[..SALT_LEN].try_into().expect("salt length")
}

impl Vault {
    /// Encrypts every code of `batch` under `password`.
    pub fn provision(
        batch: &TicBatch,
        password: &str,
        policy: TicPolicy,
        crypto: &HybridCrypto,
        salt_seed: u64,
    ) -> Result<Self, VaultError> {
        if batch.codes.is_empty() {
            return Err(VaultError::EmptyBatch);
        }
        Self::seal_all(&batch.codes, password, policy, crypto, salt_seed, DEFAULT_KDF_ITERATIONS)
    }

    fn seal_all(
        codes: &[TicCode],
        password: &str,
        policy: TicPolicy,
        crypto: &HybridCrypto,
        salt_seed: u64,
        iterations: u32,
    ) -> Result<Self, VaultError> {
        if codes.len() > u16::MAX as usize {
            return Err(VaultError::TooManyEntries);
        }
        let salt = salt_from_seed(salt_seed);
        let key = password_key(password, &salt, iterations);
        let mut verifier = [0u8; VERIFIER_LEN];
        verifier.copy_from_slice(&verifier_mac(&key).finalize().into_bytes()[..VERIFIER_LEN]);
        let binding = Binding::new(VAULT_BINDING, VAULT_PURPOSE);
        let entries = codes
            .iter()
            .map(|c| crypto.seal(KeyRole::VaultSealed, &key, &binding, c.as_bytes()).to_bytes())
            .collect();
        Ok(Self {
            salt,
            iterations,
            verifier,
            entries,
            policy,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn policy(&self) -> &TicPolicy {
        &self.policy
    }

    /// Raw sealed entries, as stored.
    pub fn entries(&self) -> &[Vec<u8>] {
        &self.entries
    }

    fn key_for(&self, password: &str) -> Result<KeyBytes, VaultError> {
        let key = password_key(password, &self.salt, self.iterations);
        verifier_mac(&key)
            .verify_truncated_left(&self.verifier)
            .map_err(|_| VaultError::Locked)?;
        Ok(key)
    }

    fn open_entry(&self, key: &KeyBytes, crypto: &HybridCrypto, raw: &[u8]) -> Result<TicCode, VaultError> {
        let ct = Ciphertext::from_bytes(raw).map_err(|_| VaultError::Malformed("entry"))?;
        let binding = Binding::new(VAULT_BINDING, VAULT_PURPOSE);
        let plain = crypto
            .open(KeyRole::VaultSealed, key, &binding, &ct)
            .map_err(|_| VaultError::Locked)?;
        TicCode::from_bytes(&plain, &self.policy).map_err(|_| VaultError::Malformed("stored code"))
    }

    /// Every stored code in issue order.
    pub fn unlock(&self, password: &str, crypto: &HybridCrypto) -> Result<Vec<TicCode>, VaultError> {
        let key = self.key_for(password)?;
        self.entries
            .iter()
            .map(|raw| self.open_entry(&key, crypto, raw))
            .collect()
    }

    /// Returns one code and the vault without it.
    pub fn unlock_and_pick(
        &self,
        password: &str,
        crypto: &HybridCrypto,
        pick: PickPolicy,
    ) -> Result<(TicCode, Vault), VaultError> {
        let key = self.key_for(password)?;
        if self.entries.is_empty() {
            return Err(VaultError::Empty);
        }
        let index = match pick {
            PickPolicy::FirstIssued => 0,
            PickPolicy::Uniform(draw) => (draw % self.entries.len() as u64) as usize,
        };
        let code = self.open_entry(&key, crypto, &self.entries[index])?;
        let mut rest = self.clone();
        rest.entries.remove(index);
        Ok((code, rest))
    }

    pub fn change_password(
        &self,
        old_password: &str,
        new_password: &str,
        crypto: &HybridCrypto,
        salt_seed: u64,
    ) -> Result<Vault, VaultError> {
        let codes = self.unlock(old_password, crypto)?;
        Self::seal_all(&codes, new_password, self.policy, crypto, salt_seed, self.iterations)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![VAULT_VERSION];
        out.extend_from_slice(&self.salt);
        out.extend_from_slice(&self.iterations.to_be_bytes());
        out.extend_from_slice(&self.verifier);
        out.extend_from_slice(&(self.entries.len() as u16).to_be_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.len() as u32).to_be_bytes());
            out.extend_from_slice(e);
        }
        out
    }

    /// The code policy is not part of the file; the caller supplies it.
    pub fn from_bytes(bytes: &[u8], policy: TicPolicy) -> Result<Self, VaultError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(1)?[0] != VAULT_VERSION {
            return Err(VaultError::Malformed("unsupported version"));
        }
        let salt = r.take(SALT_LEN)?.try_into().expect("salt length");
        let iterations = u32::from_be_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if iterations == 0 {
            return Err(VaultError::Malformed("zero iterations"));
        }
        let verifier = r.take(VERIFIER_LEN)?.try_into().expect("verifier length");
        let count = u16::from_be_bytes(r.take(2)?.try_into().expect("2 bytes"));
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = u32::from_be_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
            entries.push(r.take(len)?.to_vec());
        }
        if r.pos != bytes.len() {
            return Err(VaultError::Malformed("trailing bytes"));
        }
        Ok(Self {
            salt,
            iterations,
            verifier,
            entries,
            policy,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], VaultError> {
        let end = self.pos.checked_add(n).ok_or(VaultError::Malformed("length"))?;
        let out = self
            .bytes
            .get(self.pos..end)
            .ok_or(VaultError::Malformed("truncated"))?;
        self.pos = end;
        Ok(out)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClientError {
    #[error("login failed")]
    LoginFailed(LoginRejection),
    #[error("session key did not unwrap: {0}")]
    IntegrityFailure(CryptoError),
    #[error("no live session")]
    SessionClosed,
    #[error("operation not allowed in the current client phase")]
    WrongPhase,
    #[error(transparent)]
    Vault(#[from] VaultError),
    #[error("SMS refers to a transaction this client did not start")]
    UnknownTxnReference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClientPhase {
    LoggedIn,
    ModeSelected(PaymentMode),
    Submitted,
}

/// The client's view of a live session. Dropped at close; never persisted.
#[derive(Clone, Debug)]
pub struct ClientSession {
    pub request_id: String,
    pub session_id: String,
    pub cookie_token: String,
    pub secret_key: SecretKey,
    pub phase: ClientPhase,
}

#[derive(Clone, Debug)]
pub struct ClientConfig {
    pub username: String,
    pub password: String,
    pub pin: Pin,
    pub cell_number: String,
    pub vault_password: String,
    /// When set, codes are picked uniformly at random from this seed.
    pub random_pick_seed: Option<u64>,
}

/// What the client puts on the wire for a payment.
#[derive(Clone, Debug)]
pub struct Submission {
    pub request_id: String,
    pub cookie_token: String,
    pub enc_tic: Ciphertext,
    pub enc_order: Ciphertext,
}

/// An SMS prompt as the handset sees it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmsPrompt {
    pub request_id: String,
    pub txn_id: String,
    pub amount: u64,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmsAnswer {
    pub request_id: String,
    pub txn_id: String,
    pub from_cell: String,
    pub decision: SmsDecision,
}

#[derive(Debug)]
pub struct ClientAgent {
    config: ClientConfig,
    crypto: HybridCrypto,
    vault: Vault,
    session: Option<ClientSession>,
    /// request id → amount of every payment submitted and not yet answered.
    awaiting: BTreeMap<String, u64>,
    rng: Option<ChaCha20Rng>,
}

impl ClientAgent {
    pub fn new(config: ClientConfig, crypto: HybridCrypto, vault: Vault) -> Self {
        let rng = config.random_pick_seed.map(ChaCha20Rng::seed_from_u64);
        Self {
            config,
            crypto,
            vault,
            session: None,
            awaiting: BTreeMap::new(),
            rng,
        }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn vault(&self) -> &Vault {
        &self.vault
    }

    pub fn session(&self) -> Option<&ClientSession> {
        self.session.as_ref()
    }

    /// Runs the login exchange directly against a server.
    pub fn begin_session(
        &mut self,
        server: &mut dyn LoginService,
        request_id: &str,
        now: SimTime,
    ) -> Result<&ClientSession, ClientError> {
        let resp = server
            .login(&self.config.username, &self.config.password, now)
            .map_err(ClientError::LoginFailed)?;
        self.accept_login(&resp, request_id)
    }

    /// Unwraps the session key from a login response and opens the session.
    pub fn accept_login(&mut self, resp: &LoginResponse, request_id: &str) -> Result<&ClientSession, ClientError> {
        let secret_key = self
            .crypto
            .unwrap_secret_key(&resp.wrapped_secret, self.config.pin, &resp.session_id)
            .map_err(ClientError::IntegrityFailure)?;
        Ok(self.session.insert(ClientSession {
            request_id: request_id.to_string(),
            session_id: resp.session_id.clone(),
            cookie_token: resp.cookie_token.clone(),
            secret_key,
            phase: ClientPhase::LoggedIn,
        }))
    }

    /// Records the mode choice and returns the cookie to echo with it.
    pub fn select_mode(&mut self, mode: PaymentMode) -> Result<String, ClientError> {
        let session = self.session.as_mut().ok_or(ClientError::SessionClosed)?;
        if session.phase != ClientPhase::LoggedIn {
            return Err(ClientError::WrongPhase);
        }
        session.phase = ClientPhase::ModeSelected(mode);
        Ok(session.cookie_token.clone())
    }

    /// Picks a TIC and encrypts it and the order. Nothing is emitted on error.
    pub fn compose_and_submit(&mut self, order: &PaymentOrder) -> Result<Submission, ClientError> {
        let session = self.session.as_ref().ok_or(ClientError::SessionClosed)?;
        if !matches!(session.phase, ClientPhase::ModeSelected(_)) {
            return Err(ClientError::WrongPhase);
        }
        let pick = match self.rng.as_mut() {
            Some(rng) => PickPolicy::Uniform(rng.random()),
            None => PickPolicy::FirstIssued,
        };
        let (tic, rest) = self
            .vault
            .unlock_and_pick(&self.config.vault_password, &self.crypto, pick)?;
        self.vault = rest;

        let session = self.session.as_mut().expect("checked above");
        let submission = Submission {
            request_id: session.request_id.clone(),
            cookie_token: session.cookie_token.clone(),
            enc_tic: self.crypto.encrypt_tic(&tic, &session.secret_key),
            enc_order: self.crypto.encrypt_payment(order, &tic, &session.session_id),
        };
        session.phase = ClientPhase::Submitted;
        self.awaiting.insert(session.request_id.clone(), order.amount);
        Ok(submission)
    }

    /// Answers a prompt, but only for a payment this client submitted, and only
    /// if the prompted amount is the amount it asked for.
    pub fn answer_sms(&mut self, prompt: &SmsPrompt, decision: SmsDecision) -> Result<SmsAnswer, ClientError> {
        match self.awaiting.get(&prompt.request_id) {
            Some(&amount) if amount == prompt.amount => {}
            _ => return Err(ClientError::UnknownTxnReference),
        }
        self.awaiting.remove(&prompt.request_id);
        Ok(SmsAnswer {
            request_id: prompt.request_id.clone(),
            txn_id: prompt.txn_id.clone(),
            from_cell: self.config.cell_number.clone(),
            decision,
        })
    }

    /// Discards the session and its key.
    pub fn end_session(&mut self) {
        self.session = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth_server::{AccountRecord, AuthServer, ServerConfig};
    use crate::crypto::CipherKind;
    use crate::tic_registry::TicRegistry;
    use std::collections::BTreeSet;

    fn crypto() -> HybridCrypto {
        HybridCrypto::new(CipherKind::ChaCha20Poly1305, 7)
    }

    fn batch(n: usize) -> TicBatch {
        let mut reg = TicRegistry::new(TicPolicy::default());
        reg.generate_tics("ACCT-0001-4411", n, 3, 0).unwrap()
    }

    fn vault(n: usize) -> (TicBatch, Vault) {
        let b = batch(n);
        let v = Vault::provision(&b, "hunter2", TicPolicy::default(), &crypto(), 1).unwrap();
        (b, v)
    }

    #[test]
    fn provision_and_unlock() {
        let (b, v) = vault(5);
        assert_eq!(v.len(), 5);
        assert_eq!(v.unlock("hunter2", &crypto()).unwrap(), b.codes);
        assert_eq!(v.unlock("hunter3", &crypto()), Err(VaultError::Locked));
    }

    #[test]
    fn provision_rejects_empty_batch() {
        let mut b = batch(1);
        b.codes.clear();
        assert_eq!(
            Vault::provision(&b, "pw", TicPolicy::default(), &crypto(), 1).unwrap_err(),
            VaultError::EmptyBatch
        );
    }

    #[test]
    fn sealed_entries_hide_codes() {
        let (b, v) = vault(4);
        let blob = v.to_bytes();
        for c in &b.codes {
            assert!(!blob.windows(c.as_bytes().len()).any(|w| w == c.as_bytes()));
        }
    }

    #[test]
    fn change_password_keeps_codes() {
        let (b, v) = vault(5);
        let v2 = v.change_password("hunter2", "correct horse", &crypto(), 2).unwrap();
        assert_eq!(v2.unlock("correct horse", &crypto()).unwrap(), b.codes);
        assert_eq!(v2.unlock("hunter2", &crypto()), Err(VaultError::Locked));
        assert_eq!(
            v.change_password("nope", "x", &crypto(), 2).unwrap_err(),
            VaultError::Locked
        );
    }

    #[test]
    fn change_password_on_empty_vault() {
        let (_, v) = vault(1);
        let (_, empty) = v.unlock_and_pick("hunter2", &crypto(), PickPolicy::FirstIssued).unwrap();
        let moved = empty.change_password("hunter2", "new", &crypto(), 9).unwrap();
        assert!(moved.is_empty());
        assert_eq!(moved.unlock("new", &crypto()).unwrap(), vec![]);
    }

    #[test]
    fn pick_removes_entry() {
        let (b, v) = vault(3);
        let (code, rest) = v.unlock_and_pick("hunter2", &crypto(), PickPolicy::FirstIssued).unwrap();
        assert_eq!(rest.len(), 2);
        assert!(b.codes.contains(&code));
        assert!(!rest.unlock("hunter2", &crypto()).unwrap().contains(&code));
    }

    #[test]
    fn last_pick_then_empty() {
        let (_, v) = vault(1);
        let (_, rest) = v.unlock_and_pick("hunter2", &crypto(), PickPolicy::FirstIssued).unwrap();
        assert!(rest.is_empty());
        assert_eq!(
            rest.unlock_and_pick("hunter2", &crypto(), PickPolicy::FirstIssued).unwrap_err(),
            VaultError::Empty
        );
        assert_eq!(
            rest.unlock_and_pick("wrong", &crypto(), PickPolicy::FirstIssued).unwrap_err(),
            VaultError::Locked
        );
    }

    #[test]
    fn picking_everything_yields_the_batch() {
        for policy in [PickPolicy::FirstIssued, PickPolicy::Uniform(0x9e37_79b9)] {
            let (b, mut v) = vault(12);
            let mut picked = Vec::new();
            let mut draw = 1u64;
            while !v.is_empty() {
                let p = match policy {
                    PickPolicy::FirstIssued => policy,
                    PickPolicy::Uniform(s) => {
                        draw = draw.wrapping_mul(s).wrapping_add(7);
                        PickPolicy::Uniform(draw)
                    }
                };
                let (c, rest) = v.unlock_and_pick("hunter2", &crypto(), p).unwrap();
                assert_eq!(rest.len(), v.len() - 1);
                picked.push(c);
                v = rest;
            }
            let expect: BTreeSet<_> = b.codes.iter().map(|c| c.as_str().to_string()).collect();
            let got: BTreeSet<_> = picked.iter().map(|c| c.as_str().to_string()).collect();
            assert_eq!(picked.len(), b.codes.len());
            assert_eq!(got, expect);
            if policy == PickPolicy::FirstIssued {
                assert_eq!(picked, b.codes);
            }
        }
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let (_, v) = vault(6);
        let bytes = v.to_bytes();
        let back = Vault::from_bytes(&bytes, TicPolicy::default()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(bytes[0], VAULT_VERSION);
        assert_eq!(u16::from_be_bytes([bytes[37], bytes[38]]), 6);
    }

    #[test]
    fn file_rejects_damage() {
        let (_, v) = vault(2);
        let bytes = v.to_bytes();
        assert!(Vault::from_bytes(&bytes[..bytes.len() - 1], TicPolicy::default()).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Vault::from_bytes(&extra, TicPolicy::default()).is_err());
        let mut ver = bytes.clone();
        ver[0] = 2;
        assert!(Vault::from_bytes(&ver, TicPolicy::default()).is_err());
        let mut body = bytes;
        let n = body.len();
        body[n - 3] ^= 1;
        let damaged = Vault::from_bytes(&body, TicPolicy::default()).unwrap();
        assert!(damaged.unlock("hunter2", &crypto()).is_err());
    }

    struct Setup {
        server: AuthServer,
        client: ClientAgent,
    }

    fn setup(pin: Pin) -> Setup {
        let mut server = AuthServer::new(ServerConfig::default(), crypto(), 5);
        server.add_account(AccountRecord::new(
            "ACCT-0001-4411",
            "alice",
            "pw",
            Pin::new(0xabcd_ef01_2345_6789),
            "+4790000001",
            1000,
        ));
        let b = server.issue_tics("ACCT-0001-4411", 2, 3, 0).unwrap();
        let client_crypto = HybridCrypto::new(CipherKind::ChaCha20Poly1305, 8);
        let v = Vault::provision(&b, "local", TicPolicy::default(), &client_crypto, 4).unwrap();
        let client = ClientAgent::new(
            ClientConfig {
                username: "alice".into(),
                password: "pw".into(),
                pin,
                cell_number: "+4790000001".into(),
                vault_password: "local".into(),
                random_pick_seed: None,
            },
            client_crypto,
            v,
        );
        Setup { server, client }
    }

    #[test]
    fn begin_session_agrees_on_key() {
        let mut s = setup(Pin::new(0xabcd_ef01_2345_6789));
        let session = s.client.begin_session(&mut s.server, "pay-1", 0).unwrap().clone();
        let server_side = s.server.session(&session.cookie_token).unwrap();
        assert_eq!(server_side.secret_key.bytes(), session.secret_key.bytes());
    }

    #[test]
    fn wrong_pin_fails_integrity() {
        let mut s = setup(Pin::new(1));
        assert!(matches!(
            s.client.begin_session(&mut s.server, "pay-1", 0),
            Err(ClientError::IntegrityFailure(_))
        ));
        assert!(s.client.session().is_none());
    }

    #[test]
    fn bad_credentials_fail_login() {
        let mut s = setup(Pin::new(0xabcd_ef01_2345_6789));
        s.client.config.password = "nope".into();
        assert_eq!(
            s.client.begin_session(&mut s.server, "pay-1", 0).unwrap_err(),
            ClientError::LoginFailed(LoginRejection::BadCredentials)
        );
        assert_eq!(s.server.live_sessions(), 0);
    }

    #[test]
    fn submit_reaches_awaiting_sms_and_hides_plaintext() {
        let mut s = setup(Pin::new(0xabcd_ef01_2345_6789));
        s.client.begin_session(&mut s.server, "pay-1", 0).unwrap();
        let cookie = s.client.select_mode(PaymentMode::DebitCard).unwrap();
        s.server.select_mode(Some(&cookie), PaymentMode::DebitCard).unwrap();
        let codes = s.client.vault().unlock("local", &s.client.crypto).unwrap();
        let order = PaymentOrder::transfer("ACCT-0002-9876", 70);
        let sub = s.client.compose_and_submit(&order).unwrap();
        let wire = [sub.enc_tic.to_bytes(), sub.enc_order.to_bytes()].concat();
        for needle in [codes[0].as_bytes(), b"ACCT-0002-9876".as_slice()] {
            assert!(!wire.windows(needle.len()).any(|w| w == needle));
        }
        let sms = s
            .server
            .submit_payment(Some(&cookie), &sub.enc_tic, &sub.enc_order, &crate::auth_server::PaymentGate::Direct, 1)
            .unwrap();
        assert_eq!(s.client.vault().len(), 1);

        let prompt = SmsPrompt {
            request_id: "pay-1".into(),
            txn_id: sms.txn_id.clone(),
            amount: sms.amount,
            text: sms.text,
        };
        let foreign = SmsPrompt {
            request_id: "pay-9".into(),
            ..prompt.clone()
        };
        assert_eq!(
            s.client.answer_sms(&foreign, SmsDecision::Yes).unwrap_err(),
            ClientError::UnknownTxnReference
        );
        let inflated = SmsPrompt {
            amount: 7000,
            ..prompt.clone()
        };
        assert_eq!(
            s.client.answer_sms(&inflated, SmsDecision::Yes).unwrap_err(),
            ClientError::UnknownTxnReference
        );
        let ans = s.client.answer_sms(&prompt, SmsDecision::Yes).unwrap();
        let out = s
            .server
            .handle_sms_reply(&ans.txn_id, ans.decision, &ans.from_cell, 2)
            .unwrap();
        assert_eq!(out.state, crate::auth_server::TxnState::Committed);
        // one answer per submission
        assert!(s.client.answer_sms(&prompt, SmsDecision::Yes).is_err());
    }

    #[test]
    fn empty_vault_emits_nothing() {
        let mut s = setup(Pin::new(0xabcd_ef01_2345_6789));
        s.client.vault = Vault::from_bytes(&s.client.vault.to_bytes(), TicPolicy::default()).unwrap();
        for _ in 0..2 {
            let (_, rest) = s
                .client
                .vault
                .unlock_and_pick("local", &s.client.crypto, PickPolicy::FirstIssued)
                .unwrap();
            s.client.vault = rest;
        }
        s.client.begin_session(&mut s.server, "pay-1", 0).unwrap();
        s.client.select_mode(PaymentMode::CreditCard).unwrap();
        assert_eq!(
            s.client.compose_and_submit(&PaymentOrder::transfer("X-1", 5)).unwrap_err(),
            ClientError::Vault(VaultError::Empty)
        );
        assert!(s.client.awaiting.is_empty());
    }

    #[test]
    fn submit_without_session_is_closed() {
        let mut s = setup(Pin::new(0xabcd_ef01_2345_6789));
        assert_eq!(
            s.client.compose_and_submit(&PaymentOrder::transfer("X-1", 5)).unwrap_err(),
            ClientError::SessionClosed
        );
        s.client.begin_session(&mut s.server, "pay-1", 0).unwrap();
        s.client.end_session();
        assert!(s.client.session().is_none());
    }
}
