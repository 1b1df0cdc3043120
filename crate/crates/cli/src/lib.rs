//! Front-end logic for the `ticpay` binary, kept out of `main` so it can be
//! driven from tests without spawning a process.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ticpay::scenario::{bundled, list_scenarios, run_with, RunOptions, ScenarioSpec, CHECKS};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "ticpay", version, about = "Run payment protocol scenarios against a scripted adversary")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and check the resulting trace.
    Run(RunArgs),
    /// List the bundled scenarios.
    List,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    #[arg(required_unless_present = "bundled", conflicts_with = "bundled")]
    pub file: Option<PathBuf>,
    /// Run a bundled scenario by name instead of a file.
    #[arg(long, value_name = "NAME")]
    pub bundled: Option<String>,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the trace as JSON lines.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Comma-separated subset of checks to apply.
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    pub checks: Option<Vec<String>>,
    /// More output; repeat for per-delivery detail.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn load(args: &RunArgs) -> Result<ScenarioSpec, String> {
    match (&args.bundled, &args.file) {
        (Some(name), _) => bundled(name).map_err(|e| e.to_string()),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ScenarioSpec::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
        (None, None) => Err("no scenario given".into()),
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), String> {
    std::fs::write(path, body).map_err(|e| format!("{}: {e}", path.display()))
}

fn selected_checks(names: &Option<Vec<String>>) -> Result<Option<BTreeSet<String>>, String> {
    let Some(names) = names else { return Ok(None) };
    for n in names {
        if !CHECKS.contains(&n.as_str()) {
            return Err(format!("unknown check `{n}` (known: {})", CHECKS.join(", ")));
        }
    }
    Ok(Some(names.iter().cloned().collect()))
}

/// Runs one scenario, prints a summary to `out` and errors to `err`, and
/// returns the exit status.
pub fn run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let checks = match selected_checks(&args.checks) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let spec = match load(args) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let output = match run_with(&spec, &RunOptions { seed: args.seed, checks }) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let report = &output.report;

    let writes = [
        args.trace.as_ref().map(|p| write_file(p, &output.trace.to_jsonl())),
        args.report.as_ref().map(|p| write_file(p, &report.to_json())),
    ];
    for w in writes.into_iter().flatten() {
        if let Err(e) = w {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    }

    let _ = writeln!(
        out,
        "{} seed={} deliveries={} fingerprint={}",
        report.scenario,
        report.seed,
        report.deliveries,
        &report.fingerprint[..16]
    );
    for o in &report.outcomes {
        let _ = writeln!(out, "  {} {} {}", o.client, o.result.request_id, o.result.outcome);
    }
    if args.verbose > 0 {
        for a in &report.attacks {
            let _ = writeln!(out, "  attack seq={} {} {} -> {}", a.seq, a.kind, a.msg_type, a.result);
        }
        for f in &report.leakage {
            let _ = writeln!(out, "  leak {} {:?} in {} at offset {}", f.secret_id, f.kind, f.msg_type, f.offset);
        }
    }
    for c in &report.checks {
        if c.passed && args.verbose == 0 {
            continue;
        }
        let mark = if c.passed { "ok" } else { "FAILED" };
        let at = c.seq.map(|s| format!(" (seq {s})")).unwrap_or_default();
        let _ = writeln!(out, "  check {} {mark}{at}: {}", c.name, c.detail);
    }
    if args.verbose > 1 {
        for d in output.trace.deliveries() {
            let _ = writeln!(
                out,
                "  #{} t={} {} -> {} {}",
                d.seq,
                d.time,
                d.envelope.sender,
                d.envelope.receiver,
                d.envelope.msg_type().as_str()
            );
        }
    }
    let _ = writeln!(out, "{}", if report.passed { "PASS" } else { "FAIL" });
    if report.passed {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

pub fn list(out: &mut dyn Write) -> u8 {
    let list = list_scenarios();
    let width = list.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    for (name, description) in list {
        let _ = writeln!(out, "{name:width$}  {description}");
    }
    EXIT_PASS
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match &cli.command {
        Command::Run(args) => run(args, out, err),
        Command::List => list(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(argv: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ticpay").chain(argv.iter().copied())).unwrap()
    }

    fn go(argv: &[&str]) -> (u8, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = dispatch(&cli(argv), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn file_and_bundled_are_exclusive() {
        assert!(Cli::try_parse_from(["ticpay", "run", "x.toml", "--bundled", "happy-oneway"]).is_err());
        assert!(Cli::try_parse_from(["ticpay", "run"]).is_err());
    }

    #[test]
    fn checks_split_on_commas() {
        let Command::Run(args) = cli(&["run", "--bundled", "a", "--checks", "leakage,terminal"]).command else {
            panic!()
        };
        assert_eq!(args.checks.unwrap(), ["leakage", "terminal"]);
    }

    #[test]
    fn unknown_check_is_a_usage_error() {
        let (code, _, err) = go(&["run", "--bundled", "happy-oneway", "--checks", "vibes"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("vibes"));
    }

    #[test]
    fn happy_path_prints_pass() {
        let (code, out, _) = go(&["run", "--bundled", "happy-oneway"]);
        assert_eq!(code, EXIT_PASS);
        assert!(out.contains("alice-pay-1 committed"));
        assert!(out.trim_end().ends_with("PASS"));
    }

    #[test]
    fn verbose_lists_every_check() {
        let (_, out, _) = go(&["run", "--bundled", "happy-twoway", "-v"]);
        for name in CHECKS {
            assert!(out.contains(&format!("check {name} ")), "{name}");
        }
    }

    #[test]
    fn list_has_every_bundled_name() {
        let (code, out, _) = go(&["list"]);
        assert_eq!(code, EXIT_PASS);
        assert!(out.lines().count() >= 8);
        assert!(out.lines().any(|l| l.starts_with("replay-attack ")));
    }
}
