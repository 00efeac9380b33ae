//! m-bit truncation of reals in `[0, 1]`.
//!
//! Values are held as exact integer numerators over `2^m`; conversion to
//! `f64` only happens when a vector is handed to the measurement operator.

use serde::{Deserialize, Serialize};

use crate::error::{domain, McpError, Result};

/// Largest supported resolution. Numerators must fit in a `u64`.
pub const MAX_BITS: u32 = 63;

/// `numerator / 2^bits`, with `numerator < 2^bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicValue {
    numerator: u64,
    bits: u32,
}

fn check_bits(m: u32) -> Result<()> {
    if m == 0 || m > MAX_BITS {
        return domain(format!("resolution must be in 1..={MAX_BITS} bits, got {m}"));
    }
    Ok(())
}

impl DyadicValue {
    pub fn new(numerator: u64, bits: u32) -> Result<Self> {
        check_bits(bits)?;
        if numerator >> bits != 0 {
            return domain(format!("numerator {numerator} does not fit in {bits} bits"));
        }
        Ok(Self { numerator, bits })
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / (1u64 << self.bits) as f64
    }

    /// The `i`-th binary digit after the point (1-based), i.e. `(x)_i`.
    pub fn bit(&self, i: u32) -> bool {
        assert!(i >= 1 && i <= self.bits, "bit index {i} out of 1..={}", self.bits);
        (self.numerator >> (self.bits - i)) & 1 == 1
    }

    /// Drops trailing bits to a coarser resolution.
    pub fn coarsen(&self, m: u32) -> Result<Self> {
        check_bits(m)?;
        if m > self.bits {
            return domain(format!("cannot coarsen {} bits to {m}", self.bits));
        }
        Ok(Self { numerator: self.numerator >> (self.bits - m), bits: m })
    }
}

/// `[x]_m`: keeps the first `m` bits of the binary expansion of `x`.
///
/// `x = 1` maps to `1 - 2^-m`. Floats in `[0, 1)` are dyadic, so the
/// truncation is exact.
pub fn truncate_bits(x: f64, m: u32) -> Result<DyadicValue> {
    check_bits(m)?;
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("value {x} outside [0, 1]"));
    }
    let top = (1u64 << m) - 1;
    let scaled = (x * (1u64 << m) as f64).floor();
    let numerator = if scaled >= (1u64 << m) as f64 { top } else { scaled as u64 };
    Ok(DyadicValue { numerator, bits: m })
}

/// `[x^n]_m`, all entries at a common resolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuantizedVector {
    bits: u32,
    numerators: Vec<u64>,
}

impl QuantizedVector {
    pub fn from_numerators(numerators: Vec<u64>, bits: u32) -> Result<Self> {
        check_bits(bits)?;
        if let Some(&bad) = numerators.iter().find(|&&v| v >> bits != 0) {
            return domain(format!("numerator {bad} does not fit in {bits} bits"));
        }
        Ok(Self { bits, numerators })
    }

    pub fn zeros(n: usize, bits: u32) -> Result<Self> {
        Self::from_numerators(vec![0; n], bits)
    }

    pub fn from_entries(entries: &[DyadicValue]) -> Result<Self> {
        let bits = match entries.first() {
            Some(e) => e.bits,
            None => return domain("cannot infer resolution of an empty entry list"),
        };
        if entries.iter().any(|e| e.bits != bits) {
            return Err(McpError::Domain("entries have mixed resolutions".into()));
        }
        Ok(Self { bits, numerators: entries.iter().map(|e| e.numerator).collect() })
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn entry(&self, i: usize) -> DyadicValue {
        DyadicValue { numerator: self.numerators[i], bits: self.bits }
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.numerators.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i)
    }

    pub fn support_size(&self) -> usize {
        self.numerators.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.numerators.iter().all(|&v| v == 0)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let scale = (1u64 << self.bits) as f64;
        self.numerators.iter().map(|&v| v as f64 / scale).collect()
    }

    /// Entrywise difference of numerators modulo `2^m`.
    pub fn wrapping_sub(&self, other: &QuantizedVector) -> Result<QuantizedVector> {
        if self.bits != other.bits {
            return domain("resolution mismatch in quantized subtraction");
        }
        if self.len() != other.len() {
            return Err(McpError::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        let mask = (1u64 << self.bits) - 1;
        let numerators =
            self.numerators.iter().zip(&other.numerators).map(|(&a, &b)| a.wrapping_sub(b) & mask).collect();
        Ok(QuantizedVector { bits: self.bits, numerators })
    }
}

pub fn quantize_vector(x: &[f64], m: u32) -> Result<QuantizedVector> {
    let numerators = x.iter().map(|&v| truncate_bits(v, m).map(|d| d.numerator)).collect::<Result<Vec<_>>>()?;
    Ok(QuantizedVector { bits: m, numerators })
}

/// `e_m = x - [x]_m`.
pub fn quantization_error(x: &[f64], q: &QuantizedVector) -> Vec<f64> {
    x.iter().zip(q.to_f64()).map(|(a, b)| a - b).collect()
}

/// `sqrt(n * 2^(-2m+1))`: bound on the l2 distance between two
/// quantization-error vectors of length `n`.
pub fn quantization_gap_bound(n: usize, m: u32) -> f64 {
    (n as f64 * (-(2.0 * m as f64) + 1.0).exp2()).sqrt()
}
