//! Sparse codec.
//!
//! Layout: `[tag 0][uint n][uint k+1][k positions, ceil(log2 n) bits each,
//! strictly increasing][k values, m bits each, nonzero]`.

use crate::bits::BitString;
use crate::codecs::{position_width, read_preamble, uint, write_preamble, CodecId, CodedSignal, UINT_OVERHEAD};
use crate::error::{domain, McpError, Result};
use crate::quantize::QuantizedVector;

/// Exact stream length for support size `k`.
pub fn sparse_len(k: usize, n: usize, m: u32) -> u64 {
    CodecId::Sparse.tag().len() as u64
        + uint::encoded_len(n as u64) as u64
        + uint::encoded_len(k as u64 + 1) as u64
        + k as u64 * (position_width(n) as u64 + m as u64)
}

/// Writes the stream for the given support and values; callers guarantee
/// positions are increasing and values nonzero.
pub(crate) fn write_sparse(n: usize, m: u32, positions: &[usize], values: &[u64]) -> BitString {
    let mut out = BitString::new();
    write_preamble(&mut out, CodecId::Sparse, n);
    uint::write_uint(&mut out, positions.len() as u64 + 1);
    let w = position_width(n);
    for &p in positions {
        out.push_bits(p as u64, w);
    }
    for &v in values {
        out.push_bits(v, m);
    }
    out
}

pub fn encode_sparse(x: &QuantizedVector) -> Result<CodedSignal> {
    let positions: Vec<usize> = x.support().collect();
    let values: Vec<u64> = positions.iter().map(|&i| x.numerators()[i]).collect();
    Ok(CodedSignal { codec: CodecId::Sparse, payload: write_sparse(x.len(), x.bits(), &positions, &values) })
}

pub fn decode_sparse(c: &CodedSignal, n: usize, m: u32) -> Result<QuantizedVector> {
    if c.codec != CodecId::Sparse {
        return Err(McpError::Decode(format!("expected sparse stream, got {}", c.codec)));
    }
    let mut r = c.payload.reader();
    read_preamble(&mut r, CodecId::Sparse, n)?;
    let k = uint::read_uint(&mut r)? - 1;
    if k > n as u64 {
        return Err(McpError::Decode(format!("support size {k} exceeds n = {n}")));
    }
    let k = k as usize;
    let w = position_width(n);
    let mut positions = Vec::with_capacity(k);
    for _ in 0..k {
        let p = r.read_bits(w)? as usize;
        if p >= n || positions.last().is_some_and(|&q| p <= q) {
            return Err(McpError::Decode(format!("invalid position {p}")));
        }
        positions.push(p);
    }
    let mut num = vec![0u64; n];
    for &p in &positions {
        let v = r.read_bits(m)?;
        if v == 0 {
            return Err(McpError::Decode("zero value inside support".into()));
        }
        num[p] = v;
    }
    r.expect_end()?;
    QuantizedVector::from_numerators(num, m)
}

/// `m k + (k+1)(ceil(log* n) + c) + ceil(log* (k+1)) + c`.
pub fn sparse_dl_bound(k: usize, n: usize, m: u32) -> Result<f64> {
    if k > n {
        return domain(format!("support size {k} exceeds n = {n}"));
    }
    if m == 0 || n == 0 {
        return domain("n and m must be positive");
    }
    let c = UINT_OVERHEAD as f64;
    Ok(m as f64 * k as f64
        + (k as f64 + 1.0) * (uint::ceil_log_star(n as u64)? as f64 + c)
        + uint::ceil_log_star(k as u64 + 1)? as f64
        + c)
}
