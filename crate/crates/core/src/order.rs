//! The payment order: the sensitive payload that only ever travels encrypted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::codec::{CodecError, FieldMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaymentMode {
    CreditCard,
    DebitCard,
    ElectronicTransfer,
}

impl PaymentMode {
    pub const ALL: [PaymentMode; 3] = [
        PaymentMode::CreditCard,
        PaymentMode::DebitCard,
        PaymentMode::ElectronicTransfer,
    ];

    pub fn code(self) -> u8 {
        match self {
            PaymentMode::CreditCard => 1,
            PaymentMode::DebitCard => 2,
            PaymentMode::ElectronicTransfer => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.code() == code)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PaymentMode::CreditCard => "credit-card",
            PaymentMode::DebitCard => "debit-card",
            PaymentMode::ElectronicTransfer => "electronic-transfer",
        }
    }
}

impl fmt::Display for PaymentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PaymentMode {
    type Err = OrderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| OrderError::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrderError {
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("payee account is empty")]
    EmptyPayee,
    #[error("unknown payment mode {0:?}")]
    UnknownMode(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

mod tag {
    pub const MODE: u16 = 1;
    pub const PAYEE: u16 = 2;
    pub const AMOUNT: u16 = 3;
    pub const INVOICE: u16 = 4;
    pub const BRANCH: u16 = 5;
}

/// Amounts are integer minor units.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PaymentOrder {
    pub mode: PaymentMode,
    pub payee_account: String,
    pub amount: u64,
    pub invoice_number: Option<String>,
    pub branch_code: Option<String>,
}

impl PaymentOrder {
    pub fn transfer(payee_account: impl Into<String>, amount: u64) -> Self {
        Self {
            mode: PaymentMode::ElectronicTransfer,
            payee_account: payee_account.into(),
            amount,
            invoice_number: None,
            branch_code: None,
        }
    }

    pub fn validate(&self) -> Result<(), OrderError> {
        if self.amount == 0 {
            return Err(OrderError::ZeroAmount);
        }
        if self.payee_account.is_empty() {
            return Err(OrderError::EmptyPayee);
        }
        Ok(())
    }

    pub fn to_fields(&self) -> FieldMap {
        let mut m = FieldMap::new();
        m.put_u8(tag::MODE, self.mode.code())
            .put_str(tag::PAYEE, &self.payee_account)
            .put_u64(tag::AMOUNT, self.amount)
            .put_opt_str(tag::INVOICE, self.invoice_number.as_deref())
            .put_opt_str(tag::BRANCH, self.branch_code.as_deref());
        m
    }

    /// Canonical bytes; equal orders always serialize identically.
    pub fn encode(&self) -> Vec<u8> {
        self.to_fields().encode()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, OrderError> {
        let m = FieldMap::decode(bytes)?;
        m.expect_only(&[tag::MODE, tag::PAYEE, tag::AMOUNT, tag::INVOICE, tag::BRANCH])?;
        let mode = PaymentMode::from_code(m.u8(tag::MODE)?)
            .ok_or(CodecError::InvalidValue(tag::MODE))?;
        let order = Self {
            mode,
            payee_account: m.str(tag::PAYEE)?.to_string(),
            amount: m.u64(tag::AMOUNT)?,
            invoice_number: m.opt_str(tag::INVOICE)?.map(str::to_string),
            branch_code: m.opt_str(tag::BRANCH)?.map(str::to_string),
        };
        order.validate()?;
        Ok(order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_amount_is_invalid() {
        assert_eq!(
            PaymentOrder::transfer("ACCT-1", 0).validate(),
            Err(OrderError::ZeroAmount)
        );
        assert_eq!(
            PaymentOrder::transfer("", 5).validate(),
            Err(OrderError::EmptyPayee)
        );
    }

    #[test]
    fn mode_names_parse_back() {
        for m in PaymentMode::ALL {
            assert_eq!(m.as_str().parse::<PaymentMode>().unwrap(), m);
            assert_eq!(PaymentMode::from_code(m.code()), Some(m));
        }
        assert!("cash".parse::<PaymentMode>().is_err());
    }

    #[test]
    fn decode_rejects_unknown_mode_code() {
        let mut f = PaymentOrder::transfer("ACCT-1", 5).to_fields();
        f.put_u8(1, 9);
        assert!(PaymentOrder::decode(&f.encode()).is_err());
    }

    fn arb_order() -> impl Strategy<Value = PaymentOrder> {
        (
            0usize..3,
            "[A-Z0-9-]{1,24}",
            1u64..u64::MAX,
            proptest::option::of("INV-[0-9]{1,8}"),
            proptest::option::of("[0-9]{4}"),
        )
            .prop_map(|(m, payee, amount, invoice, branch)| PaymentOrder {
                mode: PaymentMode::ALL[m],
                payee_account: payee,
                amount,
                invoice_number: invoice,
                branch_code: branch,
            })
    }

    proptest! {
        #[test]
        fn canonical_round_trip(order in arb_order()) {
            let bytes = order.encode();
            let back = PaymentOrder::decode(&bytes).unwrap();
            prop_assert_eq!(back.encode(), bytes);
            prop_assert_eq!(back, order);
        }
    }
}
