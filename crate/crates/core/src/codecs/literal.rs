//! Literal codec: `[tag 110][uint n][n values, m bits each]`.

use crate::codecs::{read_preamble, write_preamble, CodecId, CodedSignal};
use crate::error::{McpError, Result};
use crate::quantize::QuantizedVector;

pub fn encode_literal(x: &QuantizedVector) -> Result<CodedSignal> {
    let mut out = crate::bits::BitString::new();
    write_preamble(&mut out, CodecId::Literal, x.len());
    for &v in x.numerators() {
        out.push_bits(v, x.bits());
    }
    Ok(CodedSignal { codec: CodecId::Literal, payload: out })
}

pub fn decode_literal(c: &CodedSignal, n: usize, m: u32) -> Result<QuantizedVector> {
    if c.codec != CodecId::Literal {
        return Err(McpError::Decode(format!("expected literal stream, got {}", c.codec)));
    }
    let mut r = c.payload.reader();
    read_preamble(&mut r, CodecId::Literal, n)?;
    let num = (0..n).map(|_| r.read_bits(m)).collect::<Result<Vec<_>>>()?;
    r.expect_end()?;
    QuantizedVector::from_numerators(num, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::uint::encoded_len;

    #[test]
    fn length_is_header_plus_nm() {
        let x = QuantizedVector::from_numerators(vec![1, 2, 3, 0, 5], 3).unwrap();
        let c = encode_literal(&x).unwrap();
        assert_eq!(c.dl_bits() as usize, 3 + encoded_len(5) + 15);
        assert_eq!(decode_literal(&c, 5, 3).unwrap(), x);
        assert!(decode_literal(&c, 5, 4).is_err());
    }
}
