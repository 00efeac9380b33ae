//! Self-delimiting code for positive integers (Elias delta).
//!
//! Length is `2*floor(log2 L) + L` where `L` is the bit length of `n`; this
//! never exceeds `ceil(log* n) + 3`.

use crate::bits::{BitReader, BitString};
use crate::error::{domain, McpError, Result};

/// `ceil(log2 n)` for `n >= 1`.
pub fn ceil_log2(n: u64) -> u32 {
    assert!(n >= 1);
    64 - (n - 1).leading_zeros()
}

/// `log* n = ceil(log2 n) + 2 log2 max(ceil(log2 n), 1)`, in bits.
pub fn log_star(n: u64) -> Result<f64> {
    if n == 0 {
        return domain("log* is undefined at 0");
    }
    let c = ceil_log2(n);
    Ok(c as f64 + 2.0 * (c.max(1) as f64).log2())
}

/// `ceil(log* n)` computed in integers.
pub fn ceil_log_star(n: u64) -> Result<u64> {
    if n == 0 {
        return domain("log* is undefined at 0");
    }
    let c = ceil_log2(n) as u64;
    let b = c.max(1);
    Ok(c + ceil_log2(b * b) as u64)
}

pub fn encoded_len(n: u64) -> usize {
    assert!(n >= 1, "integer code starts at 1");
    let len = 64 - n.leading_zeros();
    let len_of_len = 32 - len.leading_zeros();
    (2 * (len_of_len - 1) + len) as usize
}

pub fn write_uint(out: &mut BitString, n: u64) {
    assert!(n >= 1, "integer code starts at 1");
    let len = 64 - n.leading_zeros();
    let len_of_len = 32 - len.leading_zeros();
    // gamma(len): zeros then len in binary
    out.push_bits(0, len_of_len - 1);
    out.push_bits(len as u64, len_of_len);
    // n without its leading one
    out.push_bits(n & !(1u64 << (len - 1)), len - 1);
}

pub fn encode_uint(n: u64) -> Result<BitString> {
    if n == 0 {
        return domain("integer code starts at 1");
    }
    let mut out = BitString::new();
    write_uint(&mut out, n);
    Ok(out)
}

pub fn read_uint(r: &mut BitReader<'_>) -> Result<u64> {
    let mut zeros = 0u32;
    while !r.read_bit()? {
        zeros += 1;
        if zeros > 6 {
            return Err(McpError::Decode("integer length prefix too long".into()));
        }
    }
    let len = (1u64 << zeros) | r.read_bits(zeros)?;
    if len > 64 {
        return Err(McpError::Decode(format!("integer of {len} bits exceeds 64")));
    }
    let rest = r.read_bits(len as u32 - 1)?;
    Ok((1u64 << (len - 1)) | rest)
}

pub fn decode_uint(bits: &BitString) -> Result<u64> {
    let mut r = bits.reader();
    let v = read_uint(&mut r)?;
    r.expect_end()?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::UINT_OVERHEAD;

    #[test]
    fn log_star_values() {
        assert_eq!(log_star(1).unwrap(), 0.0);
        assert_eq!(log_star(2).unwrap(), 1.0);
        // 3 + 2 log2 3
        assert!((log_star(8).unwrap() - 6.169_925_001_442_312).abs() < 1e-12);
        assert!(log_star(0).is_err());
        for n in 1..5000u64 {
            assert_eq!(ceil_log_star(n).unwrap(), log_star(n).unwrap().ceil() as u64, "n={n}");
        }
    }

    #[test]
    fn small_codes() {
        assert_eq!(encode_uint(1).unwrap().to_string(), "1");
        assert_eq!(encode_uint(2).unwrap().to_string(), "0100");
        assert_eq!(encode_uint(8).unwrap().to_string(), "00100000");
        assert!(encode_uint(8).unwrap().len() <= 11);
        assert!(encode_uint(0).is_err());
    }

    #[test]
    fn roundtrip_and_length_bound_to_a_million() {
        for n in 1..=1_000_000u64 {
            let code = encode_uint(n).unwrap();
            assert_eq!(code.len(), encoded_len(n));
            assert!(code.len() as u64 <= ceil_log_star(n).unwrap() + UINT_OVERHEAD, "n={n}");
            assert_eq!(decode_uint(&code).unwrap(), n);
        }
    }

    #[test]
    fn extremes() {
        for n in [u64::MAX, 1 << 63, (1 << 32) + 7] {
            assert_eq!(decode_uint(&encode_uint(n).unwrap()).unwrap(), n);
        }
    }

    #[test]
    fn truncated_and_malformed() {
        let code = encode_uint(1000).unwrap();
        let cut: BitString = code.as_slice()[..code.len() - 1].to_vec().into();
        assert!(decode_uint(&cut).is_err());
        assert!(decode_uint(&BitString::parse("00000000").unwrap()).is_err());
    }
}
