//! MSB-first bit strings.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{McpError, Result};

/// An owned sequence of bits, most significant bit first.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width == 64 || value >> width == 0);
        for i in (0..width).rev() {
            self.bits.push((value >> i) & 1 == 1);
        }
    }

    pub fn extend(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.bits.len() >= self.bits.len() && other.bits[..self.bits.len()] == self.bits[..]
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader { bits: &self.bits, pos: 0 }
    }

    /// Parses a string of `'0'`/`'1'` characters.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(McpError::Decode(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(|bits| BitString { bits })
    }

    /// Packs into bytes (zero padded) followed by one trailer byte holding
    /// the number of pad bits.
    pub fn to_padded_bytes(&self) -> Vec<u8> {
        let pad = (8 - self.bits.len() % 8) % 8;
        let mut out = Vec::with_capacity(self.bits.len() / 8 + 2);
        for chunk in self.bits.chunks(8) {
            let mut byte = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                if b {
                    byte |= 0x80 >> i;
                }
            }
            out.push(byte);
        }
        out.push(pad as u8);
        out
    }

    pub fn from_padded_bytes(bytes: &[u8]) -> Result<Self> {
        let (&pad, body) = bytes.split_last().ok_or_else(|| McpError::Decode("empty byte stream".into()))?;
        if pad > 7 || (body.is_empty() && pad != 0) {
            return Err(McpError::Decode(format!("invalid pad length {pad}")));
        }
        let total = body.len() * 8 - pad as usize;
        let mut bits = Vec::with_capacity(total);
        for i in 0..total {
            bits.push(body[i / 8] & (0x80 >> (i % 8)) != 0);
        }
        if let Some(&last) = body.last() {
            let mask = (1u16 << pad) as u8 - 1;
            if last & mask != 0 {
                return Err(McpError::Decode("nonzero pad bits".into()));
            }
        }
        Ok(BitString { bits })
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        BitString { bits }
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic order on bits, a proper prefix sorting first.
impl Ord for BitString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bits.cmp(&other.bits)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

pub struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl BitReader<'_> {
    pub fn read_bit(&mut self) -> Result<bool> {
        let b = *self
            .bits
            .get(self.pos)
            .ok_or_else(|| McpError::Decode(format!("truncated stream at bit {}", self.pos)))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        if width > 64 {
            return Err(McpError::Decode(format!("field width {width} exceeds 64 bits")));
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(McpError::Decode(format!("{} trailing bits", self.remaining())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padded_bytes_roundtrip() {
        for len in 0..20 {
            let bs: BitString = (0..len).map(|i| i % 3 == 0).collect::<Vec<_>>().into();
            let bytes = bs.to_padded_bytes();
            assert_eq!(*bytes.last().unwrap() as usize, (8 - len % 8) % 8);
            assert_eq!(BitString::from_padded_bytes(&bytes).unwrap(), bs);
        }
    }

    #[test]
    fn rejects_bad_trailer() {
        assert!(BitString::from_padded_bytes(&[]).is_err());
        assert!(BitString::from_padded_bytes(&[0xff, 9]).is_err());
        assert!(BitString::from_padded_bytes(&[0x01, 1]).is_err());
    }

    #[test]
    fn lexicographic_order() {
        let a = BitString::parse("01").unwrap();
        let b = BitString::parse("011").unwrap();
        let c = BitString::parse("1").unwrap();
        assert!(a < b && b < c);
        assert!(a.is_prefix_of(&b));
    }
}
