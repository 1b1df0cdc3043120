use ticpay_web::{run, tamper, TicDesk};

#[test]
fn every_bit_of_a_submitted_order_is_tamper_evident() {
    for byte in [0, 7, 40, 90] {
        for bit in [0, 3, 7] {
            let r = tamper(byte, bit, 11).unwrap();
            assert_ne!(r["outcome"], "committed", "byte {byte} bit {bit}");
            assert_eq!(r["funds_before"], r["funds_after"]);
        }
    }
}

#[test]
fn codes_redeem_exactly_once() {
    let mut desk = TicDesk::with_shape(16, true).unwrap();
    let codes = desk.issue_codes("ACC-1", 3, 5).unwrap();
    assert_eq!(codes.len(), 3);
    assert!(codes.iter().all(|c| c.len() == 16));
    assert_eq!(desk.redeem_code("ACC-1", &codes[0]), "accepted");
    assert_eq!(desk.redeem_code("ACC-1", &codes[0]), "rejected: already used");
    assert_eq!(desk.redeem_code("ACC-2", &codes[1]), "rejected: issued to another account");
    assert_eq!(desk.redeem_code("ACC-1", &codes[1]), "accepted");
}

#[test]
fn scenario_result_carries_report_and_deliveries() {
    let r = run("replay-attack", None).unwrap();
    assert_eq!(r["report"]["passed"], true);
    let n = r["deliveries"].as_array().unwrap().len() as u64;
    assert_eq!(r["report"]["deliveries"].as_u64(), Some(n));
}
