//! Scenario files: a versioned TOML schema with strict validation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{CipherKind, Pin};
use crate::netsim::AdversaryScript;
use crate::order::PaymentMode;
use crate::tic_registry::{Alphabet, CodeLength};
use crate::actors::SmsPlan;
use crate::SimTime;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    /// Not valid TOML, or a field of the wrong shape. The message carries the
    /// line, column and field name.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("unknown bundled scenario {0:?}")]
    UnknownBundled(String),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flow {
    OneWay,
    TwoWay,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deadlines {
    #[serde(default = "default_sms_timeout")]
    pub sms_timeout: SimTime,
    #[serde(default = "default_verify_timeout")]
    pub merchant_verify_timeout: SimTime,
    #[serde(default = "default_step_budget")]
    pub step_budget: u64,
}

fn default_sms_timeout() -> SimTime {
    300
}
fn default_verify_timeout() -> SimTime {
    30
}
fn default_step_budget() -> u64 {
    crate::netsim::DEFAULT_STEP_BUDGET
}

impl Default for Deadlines {
    fn default() -> Self {
        Self {
            sms_timeout: default_sms_timeout(),
            merchant_verify_timeout: default_verify_timeout(),
            step_budget: default_step_budget(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSpec {
    #[serde(default = "default_bank_id")]
    pub id: String,
    #[serde(default = "default_tic_length")]
    pub tic_length: usize,
    #[serde(default = "default_alphabet")]
    pub alphabet: Alphabet,
    #[serde(default)]
    pub tic_ttl: Option<SimTime>,
    #[serde(default = "default_lockout")]
    pub lockout_threshold: u32,
}

fn default_bank_id() -> String {
    "cbank".into()
}
fn default_tic_length() -> usize {
    16
}
fn default_alphabet() -> Alphabet {
    Alphabet::AlphanumericUpper
}
fn default_lockout() -> u32 {
    5
}

impl Default for BankSpec {
    fn default() -> Self {
        Self {
            id: default_bank_id(),
            tic_length: default_tic_length(),
            alphabet: default_alphabet(),
            tic_ttl: None,
            lockout_threshold: default_lockout(),
        }
    }
}

impl BankSpec {
    pub fn code_length(&self) -> Option<CodeLength> {
        CodeLength::from_symbols(self.tic_length)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaymentSpec {
    pub payee: String,
    pub amount: u64,
    #[serde(default = "default_transfer")]
    pub mode: PaymentMode,
    #[serde(default)]
    pub sms: SmsPlan,
    #[serde(default = "default_reply_delay")]
    pub reply_delay: SimTime,
}

fn default_transfer() -> PaymentMode {
    PaymentMode::ElectronicTransfer
}
fn default_card() -> PaymentMode {
    PaymentMode::CreditCard
}
fn default_reply_delay() -> SimTime {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvoiceHandling {
    #[serde(default = "default_card")]
    pub mode: PaymentMode,
    #[serde(default)]
    pub sms: SmsPlan,
    #[serde(default = "default_reply_delay")]
    pub reply_delay: SimTime,
    #[serde(default)]
    pub auth_retries: u32,
}

impl Default for InvoiceHandling {
    fn default() -> Self {
        Self {
            mode: default_card(),
            sms: SmsPlan::Yes,
            reply_delay: default_reply_delay(),
            auth_retries: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientSpec {
    pub name: String,
    pub username: String,
    pub password: String,
    /// 16 hex digits, the PIN on file at the bank.
    pub pin: String,
    /// The PIN the handset actually uses, when it differs from the bank's.
    #[serde(default)]
    pub handset_pin: Option<String>,
    pub cell: String,
    pub account: String,
    pub balance: i64,
    pub tic_batch: usize,
    pub vault_password: String,
    /// Pick codes uniformly at random from this seed instead of in issue order.
    #[serde(default)]
    pub random_pick: Option<u64>,
    #[serde(default)]
    pub payments: Vec<PaymentSpec>,
    #[serde(default)]
    pub invoices: InvoiceHandling,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountSpec {
    pub id: String,
    pub balance: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvoiceOrder {
    pub customer: String,
    pub amount: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MerchantSpec {
    pub id: String,
    pub display_name: String,
    pub account_number: String,
    #[serde(default = "default_merchant_bank")]
    pub bank_id: String,
    #[serde(default)]
    pub balance: i64,
    #[serde(default = "yes")]
    pub good_standing: bool,
    #[serde(default)]
    pub valid_from: SimTime,
    #[serde(default = "default_valid_until")]
    pub valid_until: SimTime,
    /// Certificate signed by someone other than the merchant bank.
    #[serde(default)]
    pub forged_certificate: bool,
    #[serde(default)]
    pub invoices: Vec<InvoiceOrder>,
}

fn default_merchant_bank() -> String {
    "mbank".into()
}
fn yes() -> bool {
    true
}
fn default_valid_until() -> SimTime {
    1_000_000
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectConformance {
    #[default]
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectLeakage {
    #[default]
    None,
    Found,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    /// request id → final outcome, e.g. `committed` or `aborted:timeout`.
    #[serde(default)]
    pub outcomes: BTreeMap<String, String>,
    #[serde(default)]
    pub conformance: ExpectConformance,
    #[serde(default)]
    pub leakage: ExpectLeakage,
    /// How many times the merchant must be credited; unchecked when absent.
    #[serde(default)]
    pub merchant_credits: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub flow: Flow,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cipher: CipherKind,
    #[serde(default)]
    pub deadlines: Deadlines,
    #[serde(default)]
    pub bank: BankSpec,
    pub clients: Vec<ClientSpec>,
    #[serde(default)]
    pub accounts: Vec<AccountSpec>,
    #[serde(default)]
    pub merchant: Option<MerchantSpec>,
    #[serde(default)]
    pub adversary: AdversaryScript,
    #[serde(default)]
    pub expect: Expect,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let spec: Self = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if self.bank.code_length().is_none() {
            return Err(invalid("bank.tic_length", "must be 8 or 16"));
        }
        if self.clients.is_empty() {
            return Err(invalid("clients", "at least one client is required"));
        }
        self.adversary.validate().map_err(|e| invalid("adversary", e))?;

        let mut names = BTreeSet::new();
        let mut users = BTreeSet::new();
        let mut cells = BTreeSet::new();
        let mut accounts = BTreeSet::new();
        for (i, c) in self.clients.iter().enumerate() {
            let at = |f: &str| format!("clients[{i}].{f}");
            for (field, value) in [
                ("name", &c.name),
                ("username", &c.username),
                ("password", &c.password),
                ("cell", &c.cell),
                ("account", &c.account),
                ("vault_password", &c.vault_password),
            ] {
                if value.trim().is_empty() {
                    return Err(invalid(at(field), "must not be empty"));
                }
            }
            if Pin::from_hex(&c.pin).is_none() {
                return Err(invalid(at("pin"), "must be exactly 16 hex digits"));
            }
            if let Some(h) = &c.handset_pin {
                if Pin::from_hex(h).is_none() {
                    return Err(invalid(at("handset_pin"), "must be exactly 16 hex digits"));
                }
            }
            if c.tic_batch == 0 {
                return Err(invalid(at("tic_batch"), "must be at least 1"));
            }
            if !names.insert(&c.name) {
                return Err(invalid(at("name"), "duplicate client name"));
            }
            if !users.insert(&c.username) {
                return Err(invalid(at("username"), "duplicate username"));
            }
            if !cells.insert(&c.cell) {
                return Err(invalid(at("cell"), "duplicate cell number"));
            }
            if !accounts.insert(&c.account) {
                return Err(invalid(at("account"), "duplicate account"));
            }
            for (j, p) in c.payments.iter().enumerate() {
                if p.amount == 0 {
                    return Err(invalid(format!("clients[{i}].payments[{j}].amount"), "must be positive"));
                }
                if p.payee.trim().is_empty() {
                    return Err(invalid(format!("clients[{i}].payments[{j}].payee"), "must not be empty"));
                }
            }
        }
        for (i, a) in self.accounts.iter().enumerate() {
            if a.id.trim().is_empty() {
                return Err(invalid(format!("accounts[{i}].id"), "must not be empty"));
            }
            if !accounts.insert(&a.id) {
                return Err(invalid(format!("accounts[{i}].id"), "duplicate account"));
            }
        }
        match (&self.merchant, self.flow) {
            (None, Flow::TwoWay) => return Err(invalid("merchant", "required for the two-way flow")),
            (Some(m), _) => {
                if m.valid_until < m.valid_from {
                    return Err(invalid("merchant.valid_until", "before valid_from"));
                }
                if m.bank_id == self.bank.id {
                    return Err(invalid("merchant.bank_id", "must differ from the customer bank"));
                }
                for (j, inv) in m.invoices.iter().enumerate() {
                    if !names.contains(&inv.customer) {
                        return Err(invalid(format!("merchant.invoices[{j}].customer"), "no such client"));
                    }
                    if inv.amount == 0 {
                        return Err(invalid(format!("merchant.invoices[{j}].amount"), "must be positive"));
                    }
                }
            }
            (None, Flow::OneWay) => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
name = "t"
flow = "one-way"

[[clients]]
name = "alice"
username = "alice"
password = "pw"
pin = "1f2e3d4c5b6a7988"
cell = "+100"
account = "ACC-1"
balance = 100
tic_batch = 2
vault_password = "v"
"#;

    #[test]
    fn minimal_parses_with_defaults() {
        let s = ScenarioSpec::from_toml(MINIMAL).unwrap();
        assert_eq!(s.deadlines.sms_timeout, 300);
        assert_eq!(s.bank.tic_length, 16);
        assert!(s.adversary.rules.is_empty());
        assert_eq!(s.expect.conformance, ExpectConformance::Pass);
    }

    #[test]
    fn missing_pin_names_the_field() {
        let text = MINIMAL.replace("pin = \"1f2e3d4c5b6a7988\"\n", "");
        let err = ScenarioSpec::from_toml(&text).unwrap_err();
        assert!(matches!(&err, ScenarioError::Parse(m) if m.contains("pin")), "{err}");
    }

    #[test]
    fn short_pin_is_invalid() {
        let text = MINIMAL.replace("1f2e3d4c5b6a7988", "1234");
        let err = ScenarioSpec::from_toml(&text).unwrap_err();
        assert_eq!(
            err,
            invalid("clients[0].pin", "must be exactly 16 hex digits"),
        );
    }

    #[test]
    fn unknown_field_is_an_error() {
        let text = MINIMAL.replace("flow = \"one-way\"", "flow = \"one-way\"\nflavour = 1");
        assert!(matches!(ScenarioSpec::from_toml(&text), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn wrong_schema_version() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(
            ScenarioSpec::from_toml(&text),
            Err(ScenarioError::Invalid { field, .. }) if field == "schema_version"
        ));
    }

    #[test]
    fn two_way_needs_a_merchant() {
        let text = MINIMAL.replace("one-way", "two-way");
        assert!(matches!(
            ScenarioSpec::from_toml(&text),
            Err(ScenarioError::Invalid { field, .. }) if field == "merchant"
        ));
    }

    #[test]
    fn toml_round_trip() {
        let s = ScenarioSpec::from_toml(MINIMAL).unwrap();
        assert_eq!(ScenarioSpec::from_toml(&s.to_toml()).unwrap(), s);
    }
}
