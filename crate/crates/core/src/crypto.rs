//! Hybrid encryption for the payment protocol.
//!
//! - The bank draws a fresh [`SecretKey`] per login session and sends it to
//!   the handset wrapped under a key derived from the customer's 64-bit [`Pin`].
//! - The handset encrypts the payment order under a key derived from the TIC
//!   it picked, and encrypts the TIC itself under the session key.
//! - The bank opens the TIC first, verifies it against the registry, and only
//!   then uses it to open the order.
//!
//! All encryption goes through the [`AeadCipher`] interface. Associated data
//! binds every ciphertext to its session, its protocol slot and its key role,
//! so a ciphertext lifted from one message cannot be replayed into another.
//!
//! Wire layout of a [`Ciphertext`]:
//!
//! ```text
//! key_role (1B) ‖ nonce (12B) ‖ body length (4B, BE) ‖ body ‖ tag (16B)
//! ```

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chacha20poly1305::aead::{AeadInPlace, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce, Tag};
use hmac::{Hmac, Mac};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::digest::short_digest;
use crate::netsim::codec::FieldMap;
use crate::order::PaymentOrder;
use crate::tic_registry::{TicCode, TicPolicy};

pub const KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

pub type KeyBytes = [u8; KEY_LEN];

type HmacSha256 = Hmac<Sha256>;

const TIC_KEY_LABEL: &str = "ticpay/v1/tic-key";
const PIN_KEY_LABEL: &str = "ticpay/v1/pin-wrap";

pub(crate) const PURPOSE_SESSION_KEY: &str = "session-key";
pub(crate) const PURPOSE_SUBMIT_TIC: &str = "submit-payment/tic";
pub(crate) const PURPOSE_SUBMIT_ORDER: &str = "submit-payment/order";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("integrity check failed")]
    IntegrityFailure,
    #[error("ciphertext has key role {found:?}, expected {expected:?}")]
    RoleMismatch { expected: KeyRole, found: KeyRole },
    #[error("malformed ciphertext: {0}")]
    Malformed(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyRole {
    /// Payment order under the TIC-derived key.
    TicKeyed,
    /// The TIC under the per-session secret key.
    SessionKeyed,
    /// The session key under the PIN-derived key.
    PinWrapped,
    /// Merchant banking details sealed by the merchant bank for itself.
    BankSealed,
    /// A TIC at rest in the handset vault.
    VaultSealed,
}

impl KeyRole {
    pub const ALL: [KeyRole; 5] = [
        KeyRole::TicKeyed,
        KeyRole::SessionKeyed,
        KeyRole::PinWrapped,
        KeyRole::BankSealed,
        KeyRole::VaultSealed,
    ];

    pub fn code(self) -> u8 {
        match self {
            KeyRole::TicKeyed => 1,
            KeyRole::SessionKeyed => 2,
            KeyRole::PinWrapped => 3,
            KeyRole::BankSealed => 4,
            KeyRole::VaultSealed => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }
}

/// The customer's 64-bit PIN, shared only between the handset and its bank.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pin(u64);

impl Pin {
    pub fn new(value: u64) -> Self {
        Self(value)
    }

    pub const fn new_const(value: u64) -> Self {
        Self(value)
    }

    /// Parses exactly 16 hex digits, with or without a `0x` prefix.
    pub fn from_hex(s: &str) -> Option<Self> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        if digits.len() != 16 {
            return None;
        }
        u64::from_str_radix(digits, 16).ok().map(Self)
    }

    pub fn to_bytes(self) -> [u8; 8] {
        self.0.to_be_bytes()
    }

    pub fn flip_bit(self, bit: u32) -> Self {
        Self(self.0 ^ (1u64 << bit))
    }
}

impl fmt::Debug for Pin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Pin(****)")
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    bytes: KeyBytes,
    session_id: String,
}

impl SecretKey {
    pub fn from_bytes(bytes: KeyBytes, session_id: impl Into<String>) -> Self {
        Self {
            bytes,
            session_id: session_id.into(),
        }
    }

    pub fn bytes(&self) -> &KeyBytes {
        &self.bytes
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn digest(&self) -> String {
        short_digest("secret-key", &self.bytes)
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey({}, #{})", self.session_id, self.digest())
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub key_role: KeyRole,
    pub nonce: [u8; NONCE_LEN],
    pub body: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Ciphertext({:?}, nonce={}, {} bytes)",
            self.key_role,
            hex::encode(self.nonce),
            self.body.len()
        )
    }
}

impl Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + NONCE_LEN + 4 + self.body.len() + TAG_LEN);
        out.push(self.key_role.code());
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.body);
        out.extend_from_slice(&self.tag);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let (&role, rest) = bytes
            .split_first()
            .ok_or(CryptoError::Malformed("empty"))?;
        let key_role = KeyRole::from_code(role).ok_or(CryptoError::Malformed("unknown key role"))?;
        if rest.len() < NONCE_LEN + 4 + TAG_LEN {
            return Err(CryptoError::Malformed("truncated"));
        }
        let (nonce, rest) = rest.split_at(NONCE_LEN);
        let (len, rest) = rest.split_at(4);
        let len = u32::from_be_bytes(len.try_into().expect("4 bytes")) as usize;
        if rest.len() != len + TAG_LEN {
            return Err(CryptoError::Malformed("length mismatch"));
        }
        let (body, tag) = rest.split_at(len);
        Ok(Self {
            key_role,
            nonce: nonce.try_into().expect("nonce length"),
            body: body.to_vec(),
            tag: tag.try_into().expect("tag length"),
        })
    }
}

/// A session key wrapped under the customer's PIN.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WrappedKey(pub Ciphertext);

/// Authenticated symmetric encryption with detached tags.
pub trait AeadCipher: Send + Sync {
    fn name(&self) -> &'static str;

    fn seal(
        &self,
        key: &KeyBytes,
        nonce: &[u8; NONCE_LEN],
        aad: &[u8],
        plaintext: &[u8],
    ) -> (Vec<u8>, [u8; TAG_LEN]);

    fn open(
        &self,
        key: &KeyBytes,
        nonce: &[u8; NONCE_LEN],
        aad: &[u8],
        body: &[u8],
        tag: &[u8; TAG_LEN],
    ) -> Result<Vec<u8>, CryptoError>;
}

/// ChaCha20-Poly1305, the default cipher.
#[derive(Clone, Copy, Debug, Default)]
pub struct ChaChaCipher;

impl AeadCipher for ChaChaCipher {
    fn name(&self) -> &'static str {
        "chacha20-poly1305"
    }

    fn seal(
        &self,
        key: &KeyBytes,
        nonce: &[u8; NONCE_LEN],
        aad: &[u8],
        plaintext: &[u8],
    ) -> (Vec<u8>, [u8; TAG_LEN]) {
        let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
        let mut body = plaintext.to_vec();
        let tag = cipher
            .encrypt_in_place_detached(Nonce::from_slice(nonce), aad, &mut body)
            .expect("plaintext within ChaCha20-Poly1305 limits");
        (body, tag.into())
    }

    fn open(
        &self,
        key: &KeyBytes,
        nonce: &[u8; NONCE_LEN],
        aad: &[u8],
        body: &[u8],
        tag: &[u8; TAG_LEN],
    ) -> Result<Vec<u8>, CryptoError> {
        let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
        let mut buf = body.to_vec();
        cipher
            .decrypt_in_place_detached(Nonce::from_slice(nonce), aad, &mut buf, Tag::from_slice(tag))
            .map_err(|_| CryptoError::IntegrityFailure)?;
        Ok(buf)
    }
}

/// Identity "encryption" with an HMAC tag.
///
/// Only for negative controls: protocol runs still authenticate correctly,
/// but every plaintext travels in the clear so leakage scans must fire.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullCipher;

impl NullCipher {
    fn tag(key: &KeyBytes, nonce: &[u8; NONCE_LEN], aad: &[u8], body: &[u8]) -> HmacSha256 {
        let mut mac = <HmacSha256 as Mac>::new_from_slice(key).expect("any key length");
        mac.update(nonce);
        mac.update(&(aad.len() as u32).to_be_bytes());
        mac.update(aad);
        mac.update(body);
        mac
    }
}

impl AeadCipher for NullCipher {
    fn name(&self) -> &'static str {
        "null"
    }

    fn seal(
        &self,
        key: &KeyBytes,
        nonce: &[u8; NONCE_LEN],
        aad: &[u8],
        plaintext: &[u8],
    ) -> (Vec<u8>, [u8; TAG_LEN]) {
        let full = Self::tag(key, nonce, aad, plaintext).finalize().into_bytes();
        let mut tag = [0u8; TAG_LEN];
        tag.copy_from_slice(&full[..TAG_LEN]);
        (plaintext.to_vec(), tag)
    }

    fn open(
        &self,
        key: &KeyBytes,
        nonce: &[u8; NONCE_LEN],
        aad: &[u8],
        body: &[u8],
        tag: &[u8; TAG_LEN],
    ) -> Result<Vec<u8>, CryptoError> {
        Self::tag(key, nonce, aad, body)
            .verify_truncated_left(tag)
            .map_err(|_| CryptoError::IntegrityFailure)?;
        Ok(body.to_vec())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CipherKind {
    #[default]
    #[serde(rename = "chacha20-poly1305")]
    ChaCha20Poly1305,
    Null,
}

impl CipherKind {
    pub fn build(self) -> Arc<dyn AeadCipher> {
        match self {
            CipherKind::ChaCha20Poly1305 => Arc::new(ChaChaCipher),
            CipherKind::Null => Arc::new(NullCipher),
        }
    }
}

/// Counter nonces: a per-instance 4-byte prefix and a 64-bit counter.
///
/// Instances that may share a key must use different prefixes.
#[derive(Debug)]
pub struct NonceCounter {
    prefix: u32,
    next: AtomicU64,
}

impl NonceCounter {
    pub fn new(prefix: u32) -> Self {
        Self {
            prefix,
            next: AtomicU64::new(0),
        }
    }

    pub fn next(&self) -> [u8; NONCE_LEN] {
        let n = self.next.fetch_add(1, Ordering::Relaxed);
        let mut nonce = [0u8; NONCE_LEN];
        nonce[..4].copy_from_slice(&self.prefix.to_be_bytes());
        nonce[4..].copy_from_slice(&n.to_be_bytes());
        nonce
    }
}

/// What a ciphertext is bound to: owning session and protocol slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binding<'a> {
    pub session_id: &'a str,
    pub purpose: &'a str,
}

impl<'a> Binding<'a> {
    pub fn new(session_id: &'a str, purpose: &'a str) -> Self {
        Self {
            session_id,
            purpose,
        }
    }

    fn aad(&self, role: KeyRole) -> Vec<u8> {
        let mut m = FieldMap::new();
        m.put_str(1, self.session_id)
            .put_str(2, self.purpose)
            .put_u8(3, role.code());
        m.encode()
    }
}

/// Fresh key material for one session, drawn from a seeded ChaCha20 stream.
pub fn generate_secret_key(session_id: &str, seed: u64) -> SecretKey {
    let mut bytes = [0u8; KEY_LEN];
    ChaCha20Rng::seed_from_u64(seed).fill_bytes(&mut bytes);
    SecretKey::from_bytes(bytes, session_id)
}

/// HMAC-SHA256 keyed by a domain-separation label.
pub fn derive_key(label: &str, input: &[u8]) -> KeyBytes {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(label.as_bytes()).expect("any key length");
    mac.update(input);
    mac.finalize().into_bytes().into()
}

pub fn derive_tic_key(tic: &TicCode) -> KeyBytes {
    derive_key(TIC_KEY_LABEL, tic.as_bytes())
}

pub fn derive_pin_key(pin: Pin) -> KeyBytes {
    derive_key(PIN_KEY_LABEL, &pin.to_bytes())
}

#[derive(Clone)]
pub struct HybridCrypto {
    cipher: Arc<dyn AeadCipher>,
    nonces: Arc<NonceCounter>,
}

impl fmt::Debug for HybridCrypto {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HybridCrypto")
            .field("cipher", &self.cipher.name())
            .field("nonces", &self.nonces)
            .finish()
    }
}

impl HybridCrypto {
    pub fn new(kind: CipherKind, nonce_prefix: u32) -> Self {
        Self::with_cipher(kind.build(), nonce_prefix)
    }

    pub fn with_cipher(cipher: Arc<dyn AeadCipher>, nonce_prefix: u32) -> Self {
        Self {
            cipher,
            nonces: Arc::new(NonceCounter::new(nonce_prefix)),
        }
    }

    pub fn cipher_name(&self) -> &'static str {
        self.cipher.name()
    }

    pub fn seal(&self, role: KeyRole, key: &KeyBytes, binding: &Binding<'_>, plaintext: &[u8]) -> Ciphertext {
        let nonce = self.nonces.next();
        let (body, tag) = self.cipher.seal(key, &nonce, &binding.aad(role), plaintext);
        Ciphertext {
            key_role: role,
            nonce,
            body,
            tag,
        }
    }

    pub fn open(
        &self,
        role: KeyRole,
        key: &KeyBytes,
        binding: &Binding<'_>,
        ct: &Ciphertext,
    ) -> Result<Vec<u8>, CryptoError> {
        if ct.key_role != role {
            return Err(CryptoError::RoleMismatch {
                expected: role,
                found: ct.key_role,
            });
        }
        self.cipher
            .open(key, &ct.nonce, &binding.aad(role), &ct.body, &ct.tag)
    }

    pub fn wrap_secret_key(&self, key: &SecretKey, pin: Pin) -> WrappedKey {
        let binding = Binding::new(key.session_id(), PURPOSE_SESSION_KEY);
        WrappedKey(self.seal(KeyRole::PinWrapped, &derive_pin_key(pin), &binding, key.bytes()))
    }

    pub fn unwrap_secret_key(
        &self,
        wrapped: &WrappedKey,
        pin: Pin,
        session_id: &str,
    ) -> Result<SecretKey, CryptoError> {
        let binding = Binding::new(session_id, PURPOSE_SESSION_KEY);
        let plain = self.open(KeyRole::PinWrapped, &derive_pin_key(pin), &binding, &wrapped.0)?;
        let bytes: KeyBytes = plain
            .as_slice()
            .try_into()
            .map_err(|_| CryptoError::Malformed("key length"))?;
        Ok(SecretKey::from_bytes(bytes, session_id))
    }

    pub fn encrypt_payment(&self, order: &PaymentOrder, tic: &TicCode, session_id: &str) -> Ciphertext {
        let binding = Binding::new(session_id, PURPOSE_SUBMIT_ORDER);
        self.seal(KeyRole::TicKeyed, &derive_tic_key(tic), &binding, &order.encode())
    }

    pub fn decrypt_payment(
        &self,
        ct: &Ciphertext,
        tic: &TicCode,
        session_id: &str,
    ) -> Result<PaymentOrder, CryptoError> {
        let binding = Binding::new(session_id, PURPOSE_SUBMIT_ORDER);
        let plain = self.open(KeyRole::TicKeyed, &derive_tic_key(tic), &binding, ct)?;
        PaymentOrder::decode(&plain).map_err(|_| CryptoError::Malformed("payment order"))
    }

    pub fn encrypt_tic(&self, tic: &TicCode, session_key: &SecretKey) -> Ciphertext {
        let binding = Binding::new(session_key.session_id(), PURPOSE_SUBMIT_TIC);
        self.seal(KeyRole::SessionKeyed, session_key.bytes(), &binding, tic.as_bytes())
    }

    pub fn decrypt_tic(
        &self,
        ct: &Ciphertext,
        session_key: &SecretKey,
        policy: &TicPolicy,
    ) -> Result<TicCode, CryptoError> {
        let binding = Binding::new(session_key.session_id(), PURPOSE_SUBMIT_TIC);
        let plain = self.open(KeyRole::SessionKeyed, session_key.bytes(), &binding, ct)?;
        TicCode::from_bytes(&plain, policy).map_err(|_| CryptoError::Malformed("TIC"))
    }
}
