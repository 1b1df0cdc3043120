//! Canonical field-map encoding.
//!
//! Every envelope body, payment order and certificate is a flat map of
//! numbered fields encoded as
//!
//! ```text
//! ┌──────────┬──────────────┬─────────┐
//! │ tag (2B) │ length (4B)  │  value  │  ... repeated, tags strictly ascending
//! └──────────┴──────────────┴─────────┘
//! ```
//!
//! All integers are big-endian. Because tags are sorted and lengths fixed-width,
//! equal maps always encode to equal bytes, so byte comparison of two encodings
//! is meaningful. Decoding is strict: unsorted or duplicate tags, truncated
//! values and trailing bytes are all errors.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("input truncated at offset {offset}")]
    Truncated { offset: usize },
    #[error("tag {tag} at offset {offset} is not strictly ascending")]
    UnsortedTag { offset: usize, tag: u16 },
    #[error("missing field {0}")]
    MissingField(u16),
    #[error("unexpected field {0}")]
    UnexpectedField(u16),
    #[error("field {0} is not valid UTF-8")]
    InvalidUtf8(u16),
    #[error("field {tag} has length {found}, expected {expected}")]
    BadLength { tag: u16, expected: usize, found: usize },
    #[error("field {0} holds an invalid value")]
    InvalidValue(u16),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct FieldMap {
    fields: BTreeMap<u16, Vec<u8>>,
}

impl FieldMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, tag: u16, value: impl Into<Vec<u8>>) -> &mut Self {
        self.fields.insert(tag, value.into());
        self
    }

    pub fn put_str(&mut self, tag: u16, value: &str) -> &mut Self {
        self.put(tag, value.as_bytes())
    }

    pub fn put_opt_str(&mut self, tag: u16, value: Option<&str>) -> &mut Self {
        if let Some(v) = value {
            self.put_str(tag, v);
        }
        self
    }

    pub fn put_u64(&mut self, tag: u16, value: u64) -> &mut Self {
        self.put(tag, value.to_be_bytes())
    }

    pub fn put_u8(&mut self, tag: u16, value: u8) -> &mut Self {
        self.put(tag, [value])
    }

    pub fn get(&self, tag: u16) -> Option<&[u8]> {
        self.fields.get(&tag).map(Vec::as_slice)
    }

    pub fn bytes(&self, tag: u16) -> Result<&[u8], CodecError> {
        self.get(tag).ok_or(CodecError::MissingField(tag))
    }

    pub fn str(&self, tag: u16) -> Result<&str, CodecError> {
        std::str::from_utf8(self.bytes(tag)?).map_err(|_| CodecError::InvalidUtf8(tag))
    }

    pub fn opt_str(&self, tag: u16) -> Result<Option<&str>, CodecError> {
        match self.get(tag) {
            None => Ok(None),
            Some(b) => std::str::from_utf8(b)
                .map(Some)
                .map_err(|_| CodecError::InvalidUtf8(tag)),
        }
    }

    pub fn u64(&self, tag: u16) -> Result<u64, CodecError> {
        let b = self.bytes(tag)?;
        let arr: [u8; 8] = b.try_into().map_err(|_| CodecError::BadLength {
            tag,
            expected: 8,
            found: b.len(),
        })?;
        Ok(u64::from_be_bytes(arr))
    }

    pub fn u8(&self, tag: u16) -> Result<u8, CodecError> {
        match self.bytes(tag)? {
            [v] => Ok(*v),
            other => Err(CodecError::BadLength {
                tag,
                expected: 1,
                found: other.len(),
            }),
        }
    }

    pub fn tags(&self) -> impl Iterator<Item = u16> + '_ {
        self.fields.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Rejects any tag outside `allowed`. Message schemas are closed.
    pub fn expect_only(&self, allowed: &[u16]) -> Result<(), CodecError> {
        match self.tags().find(|t| !allowed.contains(t)) {
            Some(t) => Err(CodecError::UnexpectedField(t)),
            None => Ok(()),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let size: usize = self.fields.values().map(|v| 6 + v.len()).sum();
        let mut out = Vec::with_capacity(size);
        for (tag, value) in &self.fields {
            out.extend_from_slice(&tag.to_be_bytes());
            out.extend_from_slice(&(value.len() as u32).to_be_bytes());
            out.extend_from_slice(value);
        }
        out
    }

    pub fn decode(input: &[u8]) -> Result<Self, CodecError> {
        let mut fields = BTreeMap::new();
        let mut offset = 0;
        let mut last: Option<u16> = None;
        while offset < input.len() {
            let header = input
                .get(offset..offset + 6)
                .ok_or(CodecError::Truncated { offset })?;
            let tag = u16::from_be_bytes([header[0], header[1]]);
            let len = u32::from_be_bytes([header[2], header[3], header[4], header[5]]) as usize;
            if last.is_some_and(|l| tag <= l) {
                return Err(CodecError::UnsortedTag { offset, tag });
            }
            let start = offset + 6;
            let value = start
                .checked_add(len)
                .and_then(|end| input.get(start..end))
                .ok_or(CodecError::Truncated { offset: start })?;
            fields.insert(tag, value.to_vec());
            last = Some(tag);
            offset = start + len;
        }
        Ok(Self { fields })
    }
}
