//! Building a roster from a scenario, running it and checking the result.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::spec::{ExpectConformance, ExpectLeakage, Flow, ScenarioError, ScenarioSpec};
use crate::actors::{BankActor, ClientActor, InvoicePlan, JobResult, MerchantActor, MerchantBankActor, PaymentPlan, Roster};
use crate::auth_server::{AccountRecord, AuthServer, ServerConfig};
use crate::client_agent::{ClientAgent, ClientConfig, Vault};
use crate::crypto::{HybridCrypto, Pin};
use crate::digest::{derive_seed, sha256};
use crate::messages::merchant_visible_fields;
use crate::netsim::{
    conformance_check, leakage_scan, one_way_template, run_with_budget, two_way_template, ActorId, ChannelAssumption,
    Conformance, Finding, Location, Origin, ProtocolTrace, Secret, SecretKind, SimError,
};
use crate::tic_registry::TicPolicy;
use crate::two_way::{MerchantAccount, MerchantAgent, MerchantBank};

/// Every check a run can apply, in report order.
pub const CHECKS: [&str; 8] = [
    "terminal",
    "outcomes",
    "conformance",
    "leakage",
    "attacks",
    "conservation",
    "merchant-blindness",
    "negative-ack-safety",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Delivery seq the result refers to; always set on failure when the
    /// trace has any delivery.
    pub seq: Option<u64>,
}

/// What became of one adversarial delivery.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AttackRecord {
    pub seq: u64,
    pub rule: usize,
    pub kind: &'static str,
    pub msg_type: &'static str,
    pub request_id: Option<String>,
    pub assumption: ChannelAssumption,
    /// `Rejected(AuthenticationFailed)`, `Rejected(Duplicate)`, `Ignored` or
    /// `Accepted(<what>)`.
    pub result: String,
}

impl AttackRecord {
    pub fn accepted(&self) -> bool {
        self.result.starts_with("Accepted")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClientOutcome {
    pub client: String,
    #[serde(flatten)]
    pub result: JobResult,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub flow: Flow,
    pub seed: u64,
    pub cipher: &'static str,
    pub deliveries: u64,
    pub fingerprint: String,
    pub outcomes: Vec<ClientOutcome>,
    pub attacks: Vec<AttackRecord>,
    pub conformance: Conformance,
    pub leakage: Vec<Finding>,
    pub balances: BTreeMap<String, i64>,
    pub total_funds_before: i64,
    pub total_funds_after: i64,
    pub merchant_credits: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl Report {
    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn outcome(&self, request_id: &str) -> Option<&str> {
        self.outcomes
            .iter()
            .find(|o| o.result.request_id == request_id)
            .map(|o| o.result.outcome.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub trace: ProtocolTrace,
    pub roster: Roster,
    pub secrets: Vec<Secret>,
    pub report: Report,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Which checks to apply; `None` means all of them.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub checks: Option<BTreeSet<String>>,
}

fn pin(hex: &str) -> Pin {
    Pin::from_hex(hex).expect("validated")
}

/// A fixed 4-byte nonce prefix per sealing party.
fn crypto_for(spec: &ScenarioSpec, party: u32) -> HybridCrypto {
    HybridCrypto::new(spec.cipher, party)
}

/// The roster a scenario describes, plus the secrets known before the run.
pub fn build(spec: &ScenarioSpec, seed: u64) -> Result<(Roster, Vec<Secret>), ScenarioError> {
    spec.validate()?;
    let policy = TicPolicy {
        length: spec.bank.code_length().expect("validated"),
        alphabet: spec.bank.alphabet,
        ttl: spec.bank.tic_ttl,
    };
    let config = ServerConfig {
        sms_timeout: spec.deadlines.sms_timeout,
        lockout_threshold: spec.bank.lockout_threshold,
        tic_policy: policy,
    };
    let mut server = AuthServer::new(config, crypto_for(spec, 1), derive_seed(seed, "bank"));
    let mut secrets = Vec::new();

    for c in &spec.clients {
        server.add_account(AccountRecord::new(
            &c.account,
            &c.username,
            &c.password,
            pin(&c.pin),
            &c.cell,
            c.balance,
        ));
        secrets.push(Secret::new(format!("pin:{}", c.name), SecretKind::Pin, pin(&c.pin).to_bytes()));
        secrets.push(Secret::new(
            format!("pin-text:{}", c.name),
            SecretKind::Pin,
            c.pin.to_ascii_lowercase().into_bytes(),
        ));
        secrets.push(Secret::new(
            format!("account:{}", c.name),
            SecretKind::AccountNumber,
            c.account.as_bytes(),
        ));
    }
    for a in &spec.accounts {
        // payee-only accounts never log in
        let password = hex::encode(sha256(&[b"no-login", a.id.as_bytes(), &seed.to_be_bytes()]));
        server.add_account(AccountRecord::new(&a.id, format!("payee:{}", a.id), &password, Pin::new(0), "", a.balance));
    }
    let payees: BTreeSet<&str> = spec
        .clients
        .iter()
        .flat_map(|c| c.payments.iter().map(|p| p.payee.as_str()))
        .collect();
    for p in payees {
        secrets.push(Secret::new(format!("payee:{p}"), SecretKind::AccountNumber, p.as_bytes()));
    }

    let mut clients = Vec::new();
    for (i, c) in spec.clients.iter().enumerate() {
        let batch = server
            .issue_tics(&c.account, c.tic_batch, derive_seed(seed, &format!("tics:{}", c.account)), 0)
            .map_err(|e| ScenarioError::Invalid {
                field: format!("clients[{i}].tic_batch"),
                message: e.to_string(),
            })?;
        for (k, code) in batch.codes.iter().enumerate() {
            secrets.push(Secret::new(format!("tic:{}:{k}", c.name), SecretKind::Tic, code.as_bytes()));
        }
        let crypto = crypto_for(spec, 100 + i as u32);
        let vault = Vault::provision(
            &batch,
            &c.vault_password,
            policy,
            &crypto,
            derive_seed(seed, &format!("vault:{}", c.name)),
        )
        .map_err(|e| ScenarioError::Invalid {
            field: format!("clients[{i}].tic_batch"),
            message: e.to_string(),
        })?;
        let agent = ClientAgent::new(
            ClientConfig {
                username: c.username.clone(),
                password: c.password.clone(),
                pin: pin(c.handset_pin.as_deref().unwrap_or(&c.pin)),
                cell_number: c.cell.clone(),
                vault_password: c.vault_password.clone(),
                random_pick_seed: c.random_pick,
            },
            crypto,
            vault,
        );
        let payments = c
            .payments
            .iter()
            .map(|p| PaymentPlan {
                payee: p.payee.clone(),
                amount: p.amount,
                mode: p.mode,
                sms: p.sms,
                reply_delay: p.reply_delay,
            })
            .collect();
        let invoice_plan = InvoicePlan {
            mode: c.invoices.mode,
            sms: c.invoices.sms,
            reply_delay: c.invoices.reply_delay,
            auth_retries: c.invoices.auth_retries,
        };
        clients.push(ClientActor::new(&c.name, agent, payments, invoice_plan));
    }

    let mut bank = BankActor::new(server, &spec.bank.id, spec.deadlines.merchant_verify_timeout);
    let (mut merchant_bank, mut merchant) = (None, None);
    if let Some(m) = &spec.merchant {
        bank = bank.with_merchant_bank(&m.bank_id);
        let master = sha256(&[b"merchant-bank-master", &seed.to_be_bytes()]);
        let mut mb = MerchantBank::new(&m.bank_id, &master, crypto_for(spec, 2));
        let account = MerchantAccount {
            merchant_id: m.id.clone(),
            display_name: m.display_name.clone(),
            account_number: m.account_number.clone(),
            balance: m.balance,
            good_standing: m.good_standing,
        };
        let mut enrollment = mb.enroll(account.clone(), m.valid_from, m.valid_until);
        if m.forged_certificate {
            let forger_master = sha256(&[b"forger", &seed.to_be_bytes()]);
            let mut forger = MerchantBank::new(&m.bank_id, &forger_master, crypto_for(spec, 3));
            enrollment.certificate = forger.enroll(account, m.valid_from, m.valid_until).certificate;
        }
        secrets.push(Secret::new(
            "merchant-account",
            SecretKind::AccountNumber,
            m.account_number.as_bytes(),
        ));
        let mut agent = MerchantAgent::new(&m.id);
        agent.install(enrollment);
        let invoices = m.invoices.iter().map(|i| (i.customer.clone(), i.amount)).collect();
        merchant = Some(MerchantActor::new(agent, invoices));
        merchant_bank = Some(MerchantBankActor::new(mb, &spec.bank.id));
    }

    Ok((
        Roster {
            bank,
            clients,
            merchant_bank,
            merchant,
        },
        secrets,
    ))
}

/// Balances of every account in both banks, clearing positions included.
pub fn balances(roster: &Roster) -> BTreeMap<String, i64> {
    let mut out = BTreeMap::new();
    let server = &roster.bank.server;
    for a in server.accounts() {
        out.insert(format!("{}/{}", roster.bank.bank_id, a.account_id), a.balance);
    }
    for (name, v) in server.clearing_accounts() {
        out.insert(format!("{}/{name}", roster.bank.bank_id), *v);
    }
    if let Some(mb) = &roster.merchant_bank {
        for m in mb.bank.merchants() {
            out.insert(format!("{}/{}", mb.bank.bank_id, m.merchant_id), m.balance);
        }
        let cp = &mb.customer_bank_id;
        out.insert(format!("{}/clearing:{cp}", mb.bank.bank_id), mb.bank.clearing_balance(cp));
    }
    out
}

/// Runs a scenario with all checks.
pub fn run(spec: &ScenarioSpec) -> Result<RunOutput, RunError> {
    run_with(spec, &RunOptions::default())
}

pub fn run_with(spec: &ScenarioSpec, options: &RunOptions) -> Result<RunOutput, RunError> {
    let seed = options.seed.unwrap_or(spec.seed);
    let (mut roster, mut secrets) = build(spec, seed)?;
    let funds_before = roster.total_funds();
    let trace = run_with_budget(&mut roster, &spec.adversary, seed, spec.deadlines.step_budget)?;

    for s in roster.bank.server.sessions() {
        secrets.push(Secret::new(
            format!("session-key:{}", s.session_id),
            SecretKind::SecretKey,
            s.secret_key.bytes().to_vec(),
        ));
    }

    let report = evaluate(spec, seed, &roster, &trace, &secrets, funds_before, options);
    Ok(RunOutput {
        trace,
        roster,
        secrets,
        report,
    })
}

fn fallback_seq(trace: &ProtocolTrace) -> Option<u64> {
    trace.last_seq()
}

fn first_seq_of(trace: &ProtocolTrace, request_id: &str) -> Option<u64> {
    trace
        .deliveries()
        .filter(|d| d.envelope.request_id() == Some(request_id))
        .map(|d| d.seq)
        .last()
}

/// Classifies every adversarial delivery by what it caused.
pub fn attack_records(trace: &ProtocolTrace) -> Vec<AttackRecord> {
    let mut out = Vec::new();
    for d in trace.deliveries() {
        let (rule, kind) = match d.origin {
            Origin::Sent => continue,
            Origin::Tampered { rule } => (rule, "tamper"),
            Origin::Replayed { rule, .. } => (rule, "replay"),
            Origin::Injected { rule } => (rule, "inject"),
        };
        let labels: Vec<&str> = trace.caused_by(d.seq).map(|t| t.label.as_str()).collect();
        let rejected = labels.iter().any(|l| {
            matches!(
                *l,
                "rejected" | "submit-denied" | "sms-reply-rejected" | "session-key-rejected" | "merchant-rejected"
            )
        });
        let accepted = [
            "basic-auth-verified",
            "sms-dispatched",
            "committed",
            "merchant-credited",
            "payment-confirmed",
        ]
        .into_iter()
        .find(|l| labels.contains(l));
        let result = if rejected {
            "Rejected(AuthenticationFailed)".to_string()
        } else if let Some(what) = accepted {
            format!("Accepted({what})")
        } else if labels.contains(&"duplicate-notice") {
            "Rejected(Duplicate)".to_string()
        } else {
            "Ignored".to_string()
        };
        out.push(AttackRecord {
            seq: d.seq,
            rule,
            kind,
            msg_type: d.envelope.msg_type().as_str(),
            request_id: d.envelope.request_id().map(str::to_string),
            assumption: d.envelope.channel.assumption(),
            result,
        });
    }
    out
}

/// Envelopes addressed to the merchant carrying anything beyond the fields a
/// merchant may see, or any customer secret verbatim.
pub fn merchant_blindness_violations(trace: &ProtocolTrace, secrets: &[Secret]) -> Vec<(u64, String)> {
    let mut out = Vec::new();
    for d in trace.deliveries().filter(|d| d.envelope.receiver == ActorId::Merchant) {
        let t = d.envelope.msg_type();
        let Some(allowed) = merchant_visible_fields(t) else {
            out.push((d.seq, format!("{t} is not a merchant-facing message")));
            continue;
        };
        let fields = crate::messages::public_fields(t, &d.envelope.body);
        for k in fields.keys() {
            if !allowed.contains(k) {
                out.push((d.seq, format!("{t} exposes {k}")));
            }
        }
        let customer_secrets = secrets.iter().filter(|s| s.id != "merchant-account");
        let bytes = d.envelope.to_bytes();
        for s in customer_secrets {
            if !s.bytes.is_empty() && bytes.windows(s.bytes.len()).any(|w| w == s.bytes.as_slice()) {
                out.push((d.seq, format!("{t} carries {}", s.id)));
            }
        }
    }
    out
}

/// Requests whose merchant check ended negative, with every payment-phase
/// delivery, TIC verification or commit seen for them afterwards.
pub fn negative_ack_violations(trace: &ProtocolTrace) -> Vec<(String, Option<u64>, String)> {
    let mut negative = BTreeSet::new();
    for t in trace.transitions() {
        if t.actor == ActorId::Bank && t.label == "merchant-verdict" && t.detail != "\"positive\"" {
            if let Some(r) = &t.request_id {
                negative.insert(r.clone());
            }
        }
        if t.actor == ActorId::Bank && t.label == "merchant-verdict" && t.detail == "\"positive\"" {
            if let Some(r) = &t.request_id {
                negative.remove(r);
            }
        }
    }
    let mut out = Vec::new();
    for r in &negative {
        for d in trace.deliveries().filter(|d| d.envelope.request_id() == Some(r.as_str())) {
            if d.envelope.msg_type().is_payment_phase() {
                out.push((r.clone(), Some(d.seq), format!("{} delivered", d.envelope.msg_type())));
            }
        }
        for t in trace.transitions().filter(|t| t.request_id.as_deref() == Some(r.as_str())) {
            if matches!(t.label.as_str(), "tic-verified" | "committed" | "sms-dispatched") {
                out.push((r.clone(), t.cause_seq, t.label.clone()));
            }
        }
    }
    out
}

fn evaluate(
    spec: &ScenarioSpec,
    seed: u64,
    roster: &Roster,
    trace: &ProtocolTrace,
    secrets: &[Secret],
    funds_before: i64,
    options: &RunOptions,
) -> Report {
    let enabled = |name: &str| options.checks.as_ref().is_none_or(|set| set.contains(name));
    let last = fallback_seq(trace);
    let mut checks = Vec::new();
    let mut push = |name: &'static str, passed: bool, detail: String, seq: Option<u64>| {
        if enabled(name) {
            checks.push(CheckResult {
                name,
                passed,
                detail,
                seq: if passed { seq } else { seq.or(last) },
            });
        }
    };

    let outcomes: Vec<ClientOutcome> = roster
        .clients
        .iter()
        .flat_map(|c| {
            c.results.iter().map(|r| ClientOutcome {
                client: c.name.clone(),
                result: r.clone(),
            })
        })
        .collect();

    let expected_jobs: usize = spec.clients.iter().map(|c| c.payments.len()).sum::<usize>()
        + spec.merchant.as_ref().map_or(0, |m| m.invoices.len());
    push(
        "terminal",
        outcomes.len() == expected_jobs,
        format!("{} of {expected_jobs} requests finished", outcomes.len()),
        last,
    );

    let mut outcome_failure = None;
    for (rid, want) in &spec.expect.outcomes {
        let got = outcomes
            .iter()
            .find(|o| &o.result.request_id == rid)
            .map(|o| o.result.outcome.as_str());
        if got != Some(want.as_str()) {
            outcome_failure = Some((
                format!("{rid}: expected {want}, got {}", got.unwrap_or("nothing")),
                first_seq_of(trace, rid),
            ));
            break;
        }
    }
    match outcome_failure {
        Some((detail, seq)) => push("outcomes", false, detail, seq),
        None => push(
            "outcomes",
            true,
            format!("{} expected outcomes matched", spec.expect.outcomes.len()),
            None,
        ),
    }

    let template = match spec.flow {
        Flow::OneWay => one_way_template(),
        Flow::TwoWay => two_way_template(),
    };
    let conformance = conformance_check(trace, &template);
    match spec.expect.conformance {
        ExpectConformance::Skip => {}
        want => {
            let (passed, detail, seq) = match (&conformance, want) {
                (Conformance::Pass { request_ids }, ExpectConformance::Pass) => {
                    (true, format!("{} requests follow the {} template", request_ids.len(), template.name), None)
                }
                (Conformance::Fail(d), ExpectConformance::Fail) => {
                    (true, format!("diverges at step {} as expected", d.step), d.seq)
                }
                (Conformance::Pass { .. }, _) => (false, "expected a divergence, trace conforms".into(), None),
                (Conformance::Fail(d), _) => (
                    false,
                    format!(
                        "request {} diverges at step {}: expected {}, found {}",
                        d.request_id.as_deref().unwrap_or("-"),
                        d.step,
                        d.expected.as_deref().unwrap_or("end"),
                        d.found.as_deref().unwrap_or("nothing")
                    ),
                    d.seq,
                ),
            };
            push("conformance", passed, detail, seq);
        }
    }

    let leakage = leakage_scan(trace, secrets);
    let leak_seq = leakage.iter().find_map(|f| match f.location {
        Location::Delivered { seq } => Some(seq),
        Location::Intercepted { .. } => None,
    });
    match spec.expect.leakage {
        ExpectLeakage::None => push(
            "leakage",
            leakage.is_empty(),
            match leakage.first() {
                None => "no secret appears on any channel".into(),
                Some(f) => format!("{} findings, first {} in {}", leakage.len(), f.secret_id, f.msg_type),
            },
            leak_seq,
        ),
        ExpectLeakage::Found => push(
            "leakage",
            !leakage.is_empty(),
            format!("{} findings (negative control)", leakage.len()),
            leak_seq,
        ),
    }

    let attacks = attack_records(trace);
    let breach = attacks
        .iter()
        .find(|a| a.accepted() && a.assumption == ChannelAssumption::Untrusted);
    push(
        "attacks",
        breach.is_none(),
        match breach {
            None => format!("{} adversarial deliveries, none accepted", attacks.len()),
            Some(a) => format!("{} {} accepted: {}", a.kind, a.msg_type, a.result),
        },
        breach.map(|a| a.seq),
    );

    let funds_after = roster.total_funds();
    let credits = roster.merchant.as_ref().map_or(0, |m| m.confirmations().len());
    let committed_two_way = roster
        .bank
        .server
        .transactions()
        .filter(|t| t.terms.is_some() && t.state == crate::auth_server::TxnState::Committed)
        .count();
    let mut conservation = funds_before == funds_after;
    let mut detail = format!("funds {funds_before} before, {funds_after} after");
    if credits != committed_two_way {
        conservation = false;
        detail = format!("{committed_two_way} committed invoices but {credits} merchant credits");
    }
    if let Some(want) = spec.expect.merchant_credits {
        if credits != want {
            conservation = false;
            detail = format!("expected {want} merchant credits, got {credits}");
        }
    }
    push("conservation", conservation, detail, None);

    if spec.flow == Flow::TwoWay {
        let v = merchant_blindness_violations(trace, secrets);
        push(
            "merchant-blindness",
            v.is_empty(),
            v.first()
                .map_or_else(|| "merchant sees only confirmations".to_string(), |(_, m)| m.clone()),
            v.first().map(|(s, _)| *s),
        );
        let v = negative_ack_violations(trace);
        push(
            "negative-ack-safety",
            v.is_empty(),
            v.first().map_or_else(
                || "no payment data moved after a negative verdict".to_string(),
                |(r, _, m)| format!("{r}: {m}"),
            ),
            v.first().and_then(|(_, s, _)| *s),
        );
    }

    let passed = checks.iter().all(|c| c.passed);
    Report {
        scenario: spec.name.clone(),
        flow: spec.flow,
        seed,
        cipher: crypto_for(spec, 0).cipher_name(),
        deliveries: trace.last_seq().unwrap_or(0),
        fingerprint: trace.fingerprint(),
        outcomes,
        attacks,
        conformance,
        leakage,
        balances: balances(roster),
        total_funds_before: funds_before,
        total_funds_after: funds_after,
        merchant_credits: credits,
        checks,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::bundled;

    #[test]
    fn happy_oneway_report() {
        let out = run(&bundled("happy-oneway").unwrap()).unwrap();
        let r = &out.report;
        assert!(r.passed, "{:#?}", r.checks);
        assert_eq!(r.outcome("alice-pay-1"), Some("committed"));
        assert!(r.conformance.is_pass());
        assert!(r.leakage.is_empty());
        assert_eq!(r.balances["cbank/ACC-0042-ALICE"], 50_000 - 2_500);
        assert_eq!(r.balances["cbank/ACC-0917-BOB"], 1_000 + 2_500);
    }

    #[test]
    fn replay_is_reported_at_its_delivery() {
        let out = run(&bundled("replay-attack").unwrap()).unwrap();
        let attack = &out.report.attacks[0];
        assert_eq!(attack.result, "Rejected(AuthenticationFailed)");
        assert!(out.trace.delivery(attack.seq).is_some());
    }

    #[test]
    fn seed_override_changes_nothing_but_randomness() {
        let spec = bundled("happy-oneway").unwrap();
        let a = run_with(&spec, &RunOptions { seed: Some(5), checks: None }).unwrap();
        let b = run_with(&spec, &RunOptions { seed: Some(6), checks: None }).unwrap();
        assert_eq!(a.report.seed, 5);
        assert!(a.report.passed && b.report.passed);
        assert_ne!(a.report.fingerprint, b.report.fingerprint);
    }

    #[test]
    fn failed_checks_cite_a_delivered_seq() {
        let mut spec = bundled("happy-oneway").unwrap();
        spec.expect.outcomes.insert("alice-pay-1".into(), "aborted:declined".into());
        let out = run(&spec).unwrap();
        let failed: Vec<_> = out.report.failed_checks().collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].name, "outcomes");
        assert!(out.trace.delivery(failed[0].seq.unwrap()).is_some());
    }

    #[test]
    fn check_selection() {
        let spec = bundled("happy-oneway").unwrap();
        let only: BTreeSet<String> = ["leakage".to_string()].into();
        let out = run_with(&spec, &RunOptions { seed: None, checks: Some(only) }).unwrap();
        assert_eq!(out.report.checks.len(), 1);
        assert_eq!(out.report.checks[0].name, "leakage");
    }

    #[test]
    fn unexpected_leak_fails_the_leakage_check() {
        let mut spec = bundled("happy-oneway").unwrap();
        spec.cipher = crate::crypto::CipherKind::Null;
        let out = run(&spec).unwrap();
        let c = out.report.check("leakage").unwrap();
        assert!(!c.passed);
        assert!(out.trace.delivery(c.seq.unwrap()).is_some());
    }

    #[test]
    fn empty_adversary_has_no_attacks() {
        let out = run(&bundled("happy-twoway").unwrap()).unwrap();
        assert!(out.report.attacks.is_empty());
        assert_eq!(out.report.merchant_credits, 1);
        assert!(merchant_blindness_violations(&out.trace, &out.secrets).is_empty());
    }
}
