//! wasm-bindgen surface for the static demo page in `www/`.
//!
//! Every export has a plain Rust twin returning `Result<_, String>` so the
//! logic can be tested natively; the exported wrappers only convert errors.

use serde_json::{json, Value};
use ticpay::messages::MsgType;
use ticpay::netsim::{Action, BitFlip, BytePos};
use ticpay::scenario::{bundled, list_scenarios, run_with, RunOptions, ScenarioSpec};
use ticpay::tic_registry::{Alphabet, CodeLength, Rejection, Verification};
use ticpay::{TicCode, TicPolicy, TicRegistry};
use wasm_bindgen::prelude::*;

fn to_js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

pub fn scenario_names() -> Value {
    list_scenarios()
        .into_iter()
        .map(|(name, description)| json!({ "name": name, "description": description }))
        .collect()
}

/// `source` is either a bundled scenario name or the text of a scenario file.
pub fn run(source: &str, seed: Option<u64>) -> Result<Value, String> {
    let spec = match bundled(source.trim()) {
        Ok(spec) => spec,
        Err(_) => ScenarioSpec::from_toml(source).map_err(|e| e.to_string())?,
    };
    run_spec(&spec, seed)
}

fn run_spec(spec: &ScenarioSpec, seed: Option<u64>) -> Result<Value, String> {
    let out = run_with(spec, &RunOptions { seed, checks: None }).map_err(|e| e.to_string())?;
    let deliveries: Vec<Value> = out
        .trace
        .deliveries()
        .map(|d| {
            json!({
                "seq": d.seq,
                "time": d.time,
                "from": d.envelope.sender.to_string(),
                "to": d.envelope.receiver.to_string(),
                "msg_type": d.envelope.msg_type().as_str(),
                "bytes": d.envelope.body.len(),
            })
        })
        .collect();
    Ok(json!({
        "report": serde_json::to_value(&out.report).map_err(|e| e.to_string())?,
        "deliveries": deliveries,
    }))
}

/// Runs the one-way payment with a single bit of the submitted order
/// flipped in transit.
pub fn tamper(byte: usize, bit: u8, seed: u64) -> Result<Value, String> {
    if bit > 7 {
        return Err("bit must be 0..=7".into());
    }
    let mut spec = bundled("tamper-order").map_err(|e| e.to_string())?;
    spec.expect.outcomes.clear();
    let rule = &mut spec.adversary.rules[0];
    rule.matcher.msg_type = Some(MsgType::SubmitPayment);
    rule.action = Action::Tamper {
        flips: vec![BitFlip { pos: BytePos::FromStart(byte), mask: 1 << bit }],
    };
    let result = run_spec(&spec, Some(seed))?;
    let report = &result["report"];
    Ok(json!({
        "outcome": report["outcomes"][0]["outcome"],
        "attacks": report["attacks"],
        "funds_before": report["total_funds_before"],
        "funds_after": report["total_funds_after"],
    }))
}

#[wasm_bindgen(js_name = listScenarios)]
pub fn list_scenarios_js() -> String {
    scenario_names().to_string()
}

#[wasm_bindgen(js_name = runScenario)]
pub fn run_scenario_js(source: &str, seed: Option<u64>) -> Result<String, JsError> {
    to_js(run(source, seed)).map(|v| v.to_string())
}

#[wasm_bindgen(js_name = tamperProbe)]
pub fn tamper_probe_js(byte: usize, bit: u8, seed: u64) -> Result<String, JsError> {
    to_js(tamper(byte, bit, seed)).map(|v| v.to_string())
}

/// A bank-side code registry the page can issue from and redeem against.
#[wasm_bindgen]
pub struct TicDesk {
    registry: TicRegistry,
    now: u64,
}

impl TicDesk {
    pub fn with_shape(symbols: usize, alphanumeric: bool) -> Result<TicDesk, String> {
        let length = CodeLength::from_symbols(symbols).ok_or("length must be 8 or 16")?;
        let alphabet = if alphanumeric { Alphabet::AlphanumericUpper } else { Alphabet::Digits };
        Ok(TicDesk {
            registry: TicRegistry::new(TicPolicy { length, alphabet, ttl: None }),
            now: 0,
        })
    }

    pub fn issue_codes(&mut self, account: &str, count: usize, seed: u64) -> Result<Vec<String>, String> {
        self.now += 1;
        let batch = self
            .registry
            .generate_tics(account, count, seed, self.now)
            .map_err(|e| e.to_string())?;
        Ok(batch.codes.iter().map(|c| c.as_str().to_string()).collect())
    }

    pub fn redeem_code(&mut self, account: &str, code: &str) -> String {
        self.now += 1;
        let code = match TicCode::parse(code.trim(), self.registry.policy()) {
            Ok(c) => c,
            Err(e) => return format!("rejected: {e}"),
        };
        match self.registry.verify_and_consume(account, &code, self.now) {
            Verification::Accepted => "accepted".into(),
            Verification::Rejected(r) => format!("rejected: {}", rejection_label(r)),
        }
    }
}

fn rejection_label(r: Rejection) -> &'static str {
    match r {
        Rejection::Unknown => "unknown code",
        Rejection::AlreadyUsed => "already used",
        Rejection::Expired => "expired",
        Rejection::WrongAccount => "issued to another account",
    }
}

#[wasm_bindgen]
impl TicDesk {
    #[wasm_bindgen(constructor)]
    pub fn new(symbols: usize, alphanumeric: bool) -> Result<TicDesk, JsError> {
        to_js(Self::with_shape(symbols, alphanumeric))
    }

    /// Newline-separated codes.
    pub fn issue(&mut self, account: &str, count: usize, seed: u64) -> Result<String, JsError> {
        to_js(self.issue_codes(account, count, seed)).map(|c| c.join("\n"))
    }

    pub fn redeem(&mut self, account: &str, code: &str) -> String {
        self.redeem_code(account, code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_include_the_happy_paths() {
        let names = scenario_names();
        let names: Vec<&str> = names.as_array().unwrap().iter().map(|v| v["name"].as_str().unwrap()).collect();
        assert!(names.contains(&"happy-oneway") && names.contains(&"happy-twoway"));
    }

    #[test]
    fn bundled_name_and_file_text_agree() {
        let by_name = run("happy-oneway", Some(3)).unwrap();
        let text = bundled("happy-oneway").unwrap().to_toml();
        let by_text = run(&text, Some(3)).unwrap();
        assert_eq!(by_name["report"]["fingerprint"], by_text["report"]["fingerprint"]);
    }

    #[test]
    fn garbage_is_a_parse_error() {
        assert!(run("flow = ", None).is_err());
    }

    #[test]
    fn out_of_range_bit_is_refused() {
        assert!(tamper(0, 8, 1).is_err());
    }

    #[test]
    fn desk_rejects_bad_shapes() {
        assert!(TicDesk::with_shape(12, true).is_err());
        assert!(TicDesk::with_shape(8, false).is_ok());
    }

    #[test]
    fn malformed_code_is_rejected_not_panicking() {
        let mut desk = TicDesk::with_shape(8, false).unwrap();
        assert!(desk.redeem_code("A", "12ab").starts_with("rejected"));
    }
}
