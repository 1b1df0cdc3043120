//! Scenarios shipped with the crate.

use super::spec::{ScenarioError, ScenarioSpec};

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        /// `(name, TOML source)` for every bundled scenario.
        pub const BUNDLED: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../scenarios/", $name, ".toml")))),*
        ];
    };
}

bundled!(
    "happy-oneway",
    "happy-twoway",
    "replay-attack",
    "tamper-order",
    "sms-timeout",
    "bad-merchant-cert",
    "wrong-pin",
    "vault-empty",
    "expired-merchant-cert",
    "notice-replay",
    "leakage-control",
);

pub fn bundled(name: &str) -> Result<ScenarioSpec, ScenarioError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::UnknownBundled(name.to_string()))?;
    ScenarioSpec::from_toml(text)
}

/// `(name, description)` of every bundled scenario.
pub fn list_scenarios() -> Vec<(&'static str, String)> {
    BUNDLED
        .iter()
        .map(|(name, text)| {
            let spec = ScenarioSpec::from_toml(text).expect("bundled scenarios are valid");
            (*name, spec.description)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    #[test]
    fn at_least_eight_unique_names() {
        let list = list_scenarios();
        assert!(list.len() >= 8);
        let names: BTreeSet<_> = list.iter().map(|(n, _)| *n).collect();
        assert_eq!(names.len(), list.len());
    }

    #[test]
    fn file_names_match_scenario_names() {
        for (name, _) in BUNDLED {
            assert_eq!(bundled(name).unwrap().name, *name);
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(bundled("nope"), Err(ScenarioError::UnknownBundled(_))));
    }
}
