//! Bank-side generation, issuance, matching and single-use cancellation of
//! Transaction Identification Codes.
//!
//! A TIC is valid for exactly one transaction. The registry enforces that
//! uniqueness bank-wide: no two records ever share a code, so a code presented
//! for the wrong account is distinguishable from one that was never issued.
//! Those distinctions stay internal; callers facing the network must collapse
//! every [`Rejection`] into one generic denial.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{sha256, short_digest};
use crate::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alphabet {
    Digits,
    AlphanumericUpper,
}

impl Alphabet {
    pub fn symbols(self) -> &'static [u8] {
        match self {
            Alphabet::Digits => b"0123456789",
            Alphabet::AlphanumericUpper => b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ",
        }
    }

    pub fn contains(self, symbol: u8) -> bool {
        self.symbols().contains(&symbol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeLength {
    #[serde(rename = "8")]
    Eight,
    #[serde(rename = "16")]
    Sixteen,
}

impl CodeLength {
    pub fn symbols(self) -> usize {
        match self {
            CodeLength::Eight => 8,
            CodeLength::Sixteen => 16,
        }
    }

    pub fn from_symbols(n: usize) -> Option<Self> {
        match n {
            8 => Some(CodeLength::Eight),
            16 => Some(CodeLength::Sixteen),
            _ => None,
        }
    }
}

/// Shape and lifetime of the codes a registry issues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicPolicy {
    pub length: CodeLength,
    pub alphabet: Alphabet,
    /// Validity period from issuance; `None` means codes never expire.
    pub ttl: Option<SimTime>,
}

impl Default for TicPolicy {
    fn default() -> Self {
        Self {
            length: CodeLength::Sixteen,
            alphabet: Alphabet::AlphanumericUpper,
            ttl: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TicError {
    #[error("a batch needs at least one code")]
    EmptyBatch,
    #[error("could not draw {wanted} distinct codes after {redraws} redraws")]
    CollisionExhaustion { wanted: usize, redraws: u32 },
    #[error("malformed TIC: {0}")]
    Malformed(&'static str),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TicCode {
    value: String,
    alphabet: Alphabet,
}

impl TicCode {
    pub fn parse(value: &str, policy: &TicPolicy) -> Result<Self, TicError> {
        if value.len() != policy.length.symbols() {
            return Err(TicError::Malformed("wrong length"));
        }
        if !value.bytes().all(|b| policy.alphabet.contains(b)) {
            return Err(TicError::Malformed("symbol outside alphabet"));
        }
        Ok(Self {
            value: value.to_string(),
            alphabet: policy.alphabet,
        })
    }

    pub fn from_bytes(bytes: &[u8], policy: &TicPolicy) -> Result<Self, TicError> {
        let s = std::str::from_utf8(bytes).map_err(|_| TicError::Malformed("not UTF-8"))?;
        Self::parse(s, policy)
    }

    pub fn as_str(&self) -> &str {
        &self.value
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.value.as_bytes()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// The only form in which a code may appear in logs and traces.
    pub fn digest(&self) -> String {
        short_digest("tic", self.as_bytes())
    }
}

impl fmt::Debug for TicCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TicCode(#{})", self.digest())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TicState {
    Issued,
    Consumed,
    Expired,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TicRecord {
    pub code: TicCode,
    pub account_id: String,
    pub batch_id: String,
    pub issued_at: SimTime,
    pub expires_at: Option<SimTime>,
    pub state: TicState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TicBatch {
    pub account_id: String,
    pub batch_id: String,
    pub codes: Vec<TicCode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    Unknown,
    AlreadyUsed,
    Expired,
    WrongAccount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verification {
    Accepted,
    Rejected(Rejection),
}

/// Trace-safe view of a record: the code appears only as a digest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TicRecordView {
    pub account_id: String,
    pub code_digest: String,
    pub state: TicState,
    pub issued_at: SimTime,
    pub expires_at: Option<SimTime>,
}

/// Pluggable code generator. Banks are expected to swap in their own.
pub trait TicSource {
    fn draw(&mut self, policy: &TicPolicy) -> String;
}

/// ChaCha20 stream seeded from `(account_id, seed)`.
pub struct SeededTicSource {
    rng: ChaCha20Rng,
}

impl SeededTicSource {
    pub fn new(account_id: &str, seed: u64) -> Self {
        let key = sha256(&[b"tic-source", account_id.as_bytes(), &seed.to_be_bytes()]);
        Self {
            rng: ChaCha20Rng::from_seed(key),
        }
    }
}

impl TicSource for SeededTicSource {
    fn draw(&mut self, policy: &TicPolicy) -> String {
        let symbols = policy.alphabet.symbols();
        (0..policy.length.symbols())
            .map(|_| symbols[self.rng.random_range(0..symbols.len())] as char)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct TicRegistry {
    policy: TicPolicy,
    records: BTreeMap<String, TicRecord>,
    next_batch: u64,
    max_redraws: u32,
}

impl TicRegistry {
    pub const DEFAULT_MAX_REDRAWS: u32 = 64;

    pub fn new(policy: TicPolicy) -> Self {
        Self {
            policy,
            records: BTreeMap::new(),
            next_batch: 1,
            max_redraws: Self::DEFAULT_MAX_REDRAWS,
        }
    }

    pub fn with_max_redraws(mut self, max_redraws: u32) -> Self {
        self.max_redraws = max_redraws;
        self
    }

    pub fn policy(&self) -> &TicPolicy {
        &self.policy
    }

    /// Issues `count` fresh codes to `account_id` from the default seeded source.
    pub fn generate_tics(
        &mut self,
        account_id: &str,
        count: usize,
        seed: u64,
        now: SimTime,
    ) -> Result<TicBatch, TicError> {
        let mut source = SeededTicSource::new(account_id, seed);
        self.generate_tics_with(account_id, count, &mut source, now)
    }

    /// Nothing is registered unless the whole batch could be drawn.
    pub fn generate_tics_with(
        &mut self,
        account_id: &str,
        count: usize,
        source: &mut dyn TicSource,
        now: SimTime,
    ) -> Result<TicBatch, TicError> {
        if count == 0 {
            return Err(TicError::EmptyBatch);
        }
        let mut codes: Vec<TicCode> = Vec::with_capacity(count);
        let mut taken = std::collections::HashSet::with_capacity(count);
        let mut redraws = 0u32;
        while codes.len() < count {
            let value = source.draw(&self.policy);
            let code = TicCode::parse(&value, &self.policy)?;
            if self.records.contains_key(code.as_str()) || !taken.insert(value) {
                redraws += 1;
                if redraws > self.max_redraws {
                    return Err(TicError::CollisionExhaustion {
                        wanted: count,
                        redraws: self.max_redraws,
                    });
                }
                continue;
            }
            codes.push(code);
        }

        let batch_id = format!("B{}", self.next_batch);
        self.next_batch += 1;
        let expires_at = self.policy.ttl.map(|ttl| now + ttl);
        for code in &codes {
            self.records.insert(
                code.as_str().to_string(),
                TicRecord {
                    code: code.clone(),
                    account_id: account_id.to_string(),
                    batch_id: batch_id.clone(),
                    issued_at: now,
                    expires_at,
                    state: TicState::Issued,
                },
            );
        }
        Ok(TicBatch {
            account_id: account_id.to_string(),
            batch_id,
            codes,
        })
    }

    /// Accepts an issued, unexpired code for its own account exactly once.
    pub fn verify_and_consume(
        &mut self,
        account_id: &str,
        candidate: &TicCode,
        now: SimTime,
    ) -> Verification {
        let Some(record) = self.records.get_mut(candidate.as_str()) else {
            return Verification::Rejected(Rejection::Unknown);
        };
        if record.account_id != account_id {
            return Verification::Rejected(Rejection::WrongAccount);
        }
        match record.state {
            TicState::Consumed => Verification::Rejected(Rejection::AlreadyUsed),
            TicState::Expired => Verification::Rejected(Rejection::Expired),
            TicState::Issued if record.expires_at.is_some_and(|t| t < now) => {
                record.state = TicState::Expired;
                Verification::Rejected(Rejection::Expired)
            }
            TicState::Issued => {
                record.state = TicState::Consumed;
                Verification::Accepted
            }
        }
    }

    pub fn expire_stale(&mut self, now: SimTime) -> usize {
        let mut n = 0;
        for record in self.records.values_mut() {
            if record.state == TicState::Issued && record.expires_at.is_some_and(|t| t < now) {
                record.state = TicState::Expired;
                n += 1;
            }
        }
        n
    }

    pub fn record(&self, code: &TicCode) -> Option<&TicRecord> {
        self.records.get(code.as_str())
    }

    pub fn records(&self) -> impl Iterator<Item = &TicRecord> {
        self.records.values()
    }

    pub fn count_in_state(&self, account_id: &str, state: TicState) -> usize {
        self.records
            .values()
            .filter(|r| r.account_id == account_id && r.state == state)
            .count()
    }

    pub fn snapshot(&self) -> Vec<TicRecordView> {
        self.records
            .values()
            .map(|r| TicRecordView {
                account_id: r.account_id.clone(),
                code_digest: r.code.digest(),
                state: r.state,
                issued_at: r.issued_at,
                expires_at: r.expires_at,
            })
            .collect()
    }
}
