use ticpay::scenario::{bundled, run, BUNDLED};

#[test]
fn every_bundled_scenario_passes_its_checks() {
    for (name, _) in BUNDLED {
        let out = run(&bundled(name).unwrap()).unwrap();
        let failed: Vec<_> = out.report.failed_checks().collect();
        assert!(failed.is_empty(), "{name}: {failed:#?}\noutcomes {:?}", out.report.outcomes);
    }
}
