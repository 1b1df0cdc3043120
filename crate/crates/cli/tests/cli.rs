use std::process::{Command, Output};

use serde_json::Value;

fn ticpay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ticpay")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn happy_oneway_exits_zero_with_clean_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = ticpay(&["run", "--bundled", "happy-oneway", "--report", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["outcomes"][0]["outcome"], "committed");
    assert_eq!(r["conformance"]["result"], "pass");
    assert_eq!(r["leakage"].as_array().unwrap().len(), 0);
    assert_eq!(r["passed"], true);
}

#[test]
fn replay_attack_exits_zero_and_reports_the_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let report = dir.path().join("report.json");
    let o = ticpay(&[
        "run",
        "--bundled",
        "replay-attack",
        "--trace",
        trace.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    let attacks = r["attacks"].as_array().unwrap();
    assert_eq!(attacks.len(), 1);
    assert_eq!(attacks[0]["result"], "Rejected(AuthenticationFailed)");

    // the replayed copy is in the trace at the seq the report names
    let seq = attacks[0]["seq"].as_u64().unwrap();
    let lines: Vec<Value> = std::fs::read_to_string(trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines.iter().any(|l| l["seq"].as_u64() == Some(seq) && l["kind"] == "delivered" && l["msg_type"] == "submit-payment"));
}

#[test]
fn missing_pin_is_a_parse_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    let text = include_str!("../../core/scenarios/happy-oneway.toml");
    let without: String = text.lines().filter(|l| !l.trim_start().starts_with("pin ")).map(|l| format!("{l}\n")).collect();
    assert_ne!(without, text);
    std::fs::write(&path, without).unwrap();
    let o = ticpay(&["run", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pin"));
}

#[test]
fn failed_check_exits_one_and_cites_a_trace_seq() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let report = dir.path().join("report.json");
    // the null cipher leaks, so expecting no leakage must fail
    let path = dir.path().join("s.toml");
    let text = include_str!("../../core/scenarios/leakage-control.toml").replace("leakage = \"found\"", "leakage = \"none\"");
    std::fs::write(&path, text).unwrap();
    let o = ticpay(&["run", path.to_str().unwrap(), "--trace", trace.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    let failed: Vec<&Value> = r["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).collect();
    assert!(!failed.is_empty());
    let seqs: Vec<u64> = std::fs::read_to_string(trace)
        .unwrap()
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).unwrap()["seq"].as_u64())
        .collect();
    for c in failed {
        assert!(seqs.contains(&c["seq"].as_u64().unwrap()), "{c}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("check leakage FAILED"));
}

#[test]
fn seed_override_changes_the_fingerprint_deterministically() {
    let a = ticpay(&["run", "--bundled", "happy-oneway", "--seed", "7"]);
    let b = ticpay(&["run", "--bundled", "happy-oneway", "--seed", "7"]);
    let c = ticpay(&["run", "--bundled", "happy-oneway", "--seed", "8"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&ticpay(&[])), 2);
    assert_eq!(code(&ticpay(&["run", "--bundled", "no-such-scenario"])), 2);
    assert_eq!(code(&ticpay(&["run", "/no/such/file.toml"])), 2);
}

#[test]
fn list_prints_names_with_descriptions() {
    let o = ticpay(&["list"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    for name in ["happy-oneway", "happy-twoway", "replay-attack", "tamper-order", "sms-timeout", "bad-merchant-cert", "wrong-pin", "vault-empty"] {
        let line = out.lines().find(|l| l.starts_with(name)).unwrap();
        assert!(line.len() > name.len() + 2);
    }
}
