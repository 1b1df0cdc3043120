//! Scenario files, the bundled set, and the checks applied to a run.

mod bundled;
mod runner;
mod spec;

pub use bundled::{bundled, list_scenarios, BUNDLED};
pub use runner::{
    attack_records, balances, build, merchant_blindness_violations, negative_ack_violations, run, run_with,
    AttackRecord, CheckResult, ClientOutcome, Report, RunError, RunOptions, RunOutput, CHECKS,
};
pub use spec::{
    AccountSpec, BankSpec, ClientSpec, Deadlines, Expect, ExpectConformance, ExpectLeakage, Flow, InvoiceHandling,
    InvoiceOrder, MerchantSpec, PaymentSpec, ScenarioError, ScenarioSpec, SCHEMA_VERSION,
};
