//! General-purpose compressor proxy: raw DEFLATE of the packed `n*m`-bit
//! literal, framed as `[tag 111][uint n][uint bytes+1][bytes]`.
//!
//! Only used for description-length estimates, never by the solver.

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use crate::bits::BitString;
use crate::codecs::{read_preamble, uint, write_preamble, CodecId, CodedSignal};
use crate::error::{McpError, Result};
use crate::quantize::QuantizedVector;

fn pack(x: &QuantizedVector) -> Vec<u8> {
    let mut bits = BitString::new();
    for &v in x.numerators() {
        bits.push_bits(v, x.bits());
    }
    let mut bytes = bits.to_padded_bytes();
    bytes.pop();
    bytes
}

pub fn encode_compressed(x: &QuantizedVector) -> Result<CodedSignal> {
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::best());
    enc.write_all(&pack(x))?;
    let body = enc.finish()?;
    let mut out = BitString::new();
    write_preamble(&mut out, CodecId::Compressor, x.len());
    uint::write_uint(&mut out, body.len() as u64 + 1);
    for b in body {
        out.push_bits(b as u64, 8);
    }
    Ok(CodedSignal { codec: CodecId::Compressor, payload: out })
}

pub fn decode_compressed(c: &CodedSignal, n: usize, m: u32) -> Result<QuantizedVector> {
    if c.codec != CodecId::Compressor {
        return Err(McpError::Decode(format!("expected compressor stream, got {}", c.codec)));
    }
    let mut r = c.payload.reader();
    read_preamble(&mut r, CodecId::Compressor, n)?;
    let len = uint::read_uint(&mut r)? - 1;
    if len as usize > r.remaining() / 8 {
        return Err(McpError::Decode("truncated compressed body".into()));
    }
    let body = (0..len).map(|_| r.read_bits(8).map(|b| b as u8)).collect::<Result<Vec<_>>>()?;
    r.expect_end()?;
    let expected = (n * m as usize).div_ceil(8);
    let mut raw = Vec::with_capacity(expected);
    DeflateDecoder::new(&body[..])
        .take(expected as u64 + 1)
        .read_to_end(&mut raw)
        .map_err(|e| McpError::Decode(format!("inflate failed: {e}")))?;
    if raw.len() != expected {
        return Err(McpError::Decode(format!("inflated {} bytes, expected {expected}", raw.len())));
    }
    let mut bits = BitString::new();
    for &b in &raw {
        bits.push_bits(b as u64, 8);
    }
    let mut br = bits.reader();
    let num = (0..n).map(|_| br.read_bits(m)).collect::<Result<Vec<_>>>()?;
    if br.remaining() > 0 && br.read_bits(br.remaining() as u32)? != 0 {
        return Err(McpError::Decode("nonzero padding in inflated body".into()));
    }
    QuantizedVector::from_numerators(num, m)
}
