//! One-way digests used wherever a value must be referenced without being disclosed.

use sha2::{Digest, Sha256};

pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u32).to_be_bytes());
        hasher.update(part);
    }
    hasher.finalize().into()
}

/// Domain-separated digest rendered as 16 hex characters.
pub fn short_digest(label: &str, value: &[u8]) -> String {
    hex::encode(&sha256(&[label.as_bytes(), value])[..8])
}

/// Digest of a customer account id, the only customer identity that leaves the customer bank.
pub fn customer_digest(account_id: &str) -> String {
    short_digest("customer", account_id.as_bytes())
}

/// Digest of a merchant's real account number, published in its certificate.
pub fn account_ref_digest(account_number: &str) -> String {
    short_digest("merchant-account", account_number.as_bytes())
}

/// Derives an independent 64-bit seed from a parent seed and a label.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let d = sha256(&[&parent.to_be_bytes(), label.as_bytes()]);
    u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_separate_domains() {
        assert_ne!(short_digest("a", b"x"), short_digest("b", b"x"));
        assert_eq!(short_digest("a", b"x").len(), 16);
    }

    #[test]
    fn part_boundaries_matter() {
        assert_ne!(sha256(&[b"ab", b"c"]), sha256(&[b"a", b"bc"]));
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_ne!(derive_seed(1, "bank"), derive_seed(1, "net"));
        assert_eq!(derive_seed(9, "x"), derive_seed(9, "x"));
    }
}
