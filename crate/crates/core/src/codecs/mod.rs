//! Prefix-free description-length codecs.
//!
//! Every stream starts with a prefix-free codec tag followed by the
//! ambient dimension `n` in the universal integer code, so the union of all
//! codecs' codewords is itself prefix-free. The resolution `m` is supplied
//! out of band. The shortest stream over all codecs is the computable
//! stand-in for the complexity of `[x]_m`.

pub mod compressor;
pub mod literal;
pub mod piecewise;
pub mod sparse;
pub mod uint;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::{BitReader, BitString};
use crate::error::{McpError, Result};
use crate::quantize::QuantizedVector;

pub use piecewise::{decode_piecewise_poly, encode_piecewise_poly, fit_piecewise_constant, pp_dl_bound, PiecewisePoly};
pub use sparse::{decode_sparse, encode_sparse, sparse_dl_bound};
pub use uint::{ceil_log_star, decode_uint, encode_uint, log_star};

/// The constant `c` of the integer code: `len(encode_uint(n)) <= ceil(log* n) + c`.
pub const UINT_OVERHEAD: u64 = 4;
/// Model-description slack of the piecewise-polynomial bound.
pub const PP_MODEL_OVERHEAD: u64 = 4;
/// Breakpoint-description slack of the piecewise-polynomial bound.
pub const PP_BREAKPOINT_OVERHEAD: u64 = 4;
/// Measured bound on `dl(x - y) - dl(x) - dl(y)`; see the codec soundness tests.
pub const PAIR_OVERHEAD: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecId {
    Sparse,
    PiecewisePoly,
    Literal,
    Compressor,
}

impl CodecId {
    pub const ALL: [CodecId; 4] = [CodecId::Sparse, CodecId::PiecewisePoly, CodecId::Literal, CodecId::Compressor];

    /// Prefix-free tag written at the start of every stream.
    pub fn tag(self) -> &'static [bool] {
        match self {
            CodecId::Sparse => &[false],
            CodecId::PiecewisePoly => &[true, false],
            CodecId::Literal => &[true, true, false],
            CodecId::Compressor => &[true, true, true],
        }
    }

    pub(crate) fn write_tag(self, out: &mut BitString) {
        for &b in self.tag() {
            out.push(b);
        }
    }

    pub(crate) fn read_tag(r: &mut BitReader<'_>) -> Result<CodecId> {
        if !r.read_bit()? {
            return Ok(CodecId::Sparse);
        }
        if !r.read_bit()? {
            return Ok(CodecId::PiecewisePoly);
        }
        Ok(if r.read_bit()? { CodecId::Compressor } else { CodecId::Literal })
    }

    pub fn name(self) -> &'static str {
        match self {
            CodecId::Sparse => "sparse",
            CodecId::PiecewisePoly => "piecewise_poly",
            CodecId::Literal => "literal",
            CodecId::Compressor => "compressor",
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodecId {
    type Err = McpError;

    fn from_str(s: &str) -> Result<Self> {
        CodecId::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| McpError::Config(format!("unknown codec {s:?}")))
    }
}

/// An emitted stream and the codec that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodedSignal {
    pub codec: CodecId,
    pub payload: BitString,
}

impl CodedSignal {
    /// Exact length of the stream, tag included.
    pub fn dl_bits(&self) -> u64 {
        self.payload.len() as u64
    }

    /// Reads the codec from the stream's own tag.
    pub fn from_stream(payload: BitString) -> Result<Self> {
        let codec = CodecId::read_tag(&mut payload.reader())?;
        Ok(CodedSignal { codec, payload })
    }
}

/// Description-length budget in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DlBudget(pub u64);

impl DlBudget {
    /// `ceil(2 (kappa + delta) m) + C_pair`, the complexity bound on the
    /// difference of two signals of normalized complexity `kappa + delta`.
    pub fn for_difference(kappa: f64, delta: f64, m: u32) -> Result<Self> {
        if !(kappa >= 0.0 && delta >= 0.0) || !(kappa + delta).is_finite() {
            return Err(McpError::Domain(format!("invalid kappa {kappa} / delta {delta}")));
        }
        Ok(DlBudget((2.0 * (kappa + delta) * m as f64).ceil() as u64 + PAIR_OVERHEAD))
    }

    pub fn bits(self) -> u64 {
        self.0
    }
}

/// Reads the tag and ambient dimension common to every stream.
pub(crate) fn read_preamble(r: &mut BitReader<'_>, expect: CodecId, n: usize) -> Result<()> {
    let codec = CodecId::read_tag(r)?;
    if codec != expect {
        return Err(McpError::Decode(format!("stream is {codec}, expected {expect}")));
    }
    let coded_n = uint::read_uint(r)?;
    if coded_n != n as u64 {
        return Err(McpError::Decode(format!("stream declares n = {coded_n}, expected {n}")));
    }
    Ok(())
}

pub(crate) fn write_preamble(out: &mut BitString, codec: CodecId, n: usize) {
    codec.write_tag(out);
    uint::write_uint(out, n as u64);
}

/// Codec and ambient dimension declared by a stream's preamble.
pub fn stream_header(payload: &BitString) -> Result<(CodecId, usize)> {
    let mut r = payload.reader();
    let codec = CodecId::read_tag(&mut r)?;
    let n = uint::read_uint(&mut r)?;
    let n = usize::try_from(n).map_err(|_| McpError::Decode(format!("dimension {n} does not fit")))?;
    Ok((codec, n))
}

/// Bits in the fixed-width field used for sample positions in `0..n`.
pub fn position_width(n: usize) -> u32 {
    uint::ceil_log2(n.max(1) as u64)
}

/// Encodes `x` with one codec. Every codec accepts every vector except
/// `PiecewisePoly`, which uses its piecewise-constant fit.
pub fn encode_with(codec: CodecId, x: &QuantizedVector) -> Result<CodedSignal> {
    match codec {
        CodecId::Sparse => encode_sparse(x),
        CodecId::PiecewisePoly => {
            let fit = fit_piecewise_constant(x)?;
            encode_piecewise_poly(&fit, x.len(), x.bits())
        }
        CodecId::Literal => literal::encode_literal(x),
        CodecId::Compressor => compressor::encode_compressed(x),
    }
}

/// Decodes any stream by its tag.
pub fn decode(c: &CodedSignal, n: usize, m: u32) -> Result<QuantizedVector> {
    match c.codec {
        CodecId::Sparse => decode_sparse(c, n, m),
        CodecId::PiecewisePoly => decode_piecewise_poly(c, n, m),
        CodecId::Literal => literal::decode_literal(c, n, m),
        CodecId::Compressor => compressor::decode_compressed(c, n, m),
    }
}

/// Immutable set of codecs over which the description length is minimized.
#[derive(Debug, Clone)]
pub struct CodecRegistry {
    codecs: Vec<CodecId>,
}

impl Default for CodecRegistry {
    fn default() -> Self {
        CodecRegistry { codecs: CodecId::ALL.to_vec() }
    }
}

impl CodecRegistry {
    pub fn new(codecs: &[CodecId]) -> Result<Self> {
        if !codecs.contains(&CodecId::Literal) {
            return Err(McpError::Config("registry must include the literal codec".into()));
        }
        let mut codecs = codecs.to_vec();
        codecs.sort();
        codecs.dedup();
        Ok(CodecRegistry { codecs })
    }

    /// Registry without the compressor proxy, for solver-side accounting.
    pub fn structured() -> Self {
        CodecRegistry { codecs: vec![CodecId::Sparse, CodecId::PiecewisePoly, CodecId::Literal] }
    }

    pub fn codecs(&self) -> &[CodecId] {
        &self.codecs
    }

    /// Shortest encoding over the registry; ties go to the lexicographically
    /// smaller stream.
    pub fn best(&self, x: &QuantizedVector) -> Result<CodedSignal> {
        let mut best: Option<CodedSignal> = None;
        for &codec in &self.codecs {
            let c = encode_with(codec, x)?;
            let better = match &best {
                None => true,
                Some(b) => (c.dl_bits(), &c.payload) < (b.dl_bits(), &b.payload),
            };
            if better {
                best = Some(c);
            }
        }
        Ok(best.expect("registry is never empty"))
    }
}

/// `min` over all registered codecs of the encoded length, and the winner.
pub fn dl_surrogate(x: &QuantizedVector) -> Result<(u64, CodecId)> {
    let best = CodecRegistry::default().best(x)?;
    Ok((best.dl_bits(), best.codec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::quantize_vector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tags_are_prefix_free() {
        for a in CodecId::ALL {
            for b in CodecId::ALL {
                if a != b {
                    let (ta, tb) = (a.tag(), b.tag());
                    assert!(!(ta.len() <= tb.len() && tb[..ta.len()] == *ta));
                }
            }
            let mut s = BitString::new();
            a.write_tag(&mut s);
            assert_eq!(CodecId::read_tag(&mut s.reader()).unwrap(), a);
            assert_eq!(a.name().parse::<CodecId>().unwrap(), a);
        }
    }

    #[test]
    fn zero_vector_prefers_sparse_header() {
        let z = QuantizedVector::zeros(3, 2).unwrap();
        let (bits, codec) = dl_surrogate(&z).unwrap();
        assert_eq!(codec, CodecId::Sparse);
        assert_eq!(bits, encode_sparse(&z).unwrap().dl_bits());
    }

    #[test]
    fn uniform_vector_costs_about_literal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let q = quantize_vector(&x, 16).unwrap();
        let (bits, _) = dl_surrogate(&q).unwrap();
        let literal = literal::encode_literal(&q).unwrap().dl_bits();
        assert!(bits <= literal);
        // no codec saves more than the literal header on random data
        assert!(bits + 3 + encode_uint(64).unwrap().len() as u64 >= 1024, "bits = {bits}");
    }

    #[test]
    fn two_sparse_prefers_sparse() {
        let mut num = vec![0u64; 256];
        num[17] = 200;
        num[230] = 3;
        let q = QuantizedVector::from_numerators(num, 8).unwrap();
        let (bits, codec) = dl_surrogate(&q).unwrap();
        assert_eq!(codec, CodecId::Sparse);
        assert!(bits as f64 <= sparse_dl_bound(2, 256, 8).unwrap());
    }

    #[test]
    fn budget_from_complexity() {
        assert_eq!(DlBudget::for_difference(2.0, 0.5, 8).unwrap().bits(), 40 + PAIR_OVERHEAD);
        assert!(DlBudget::for_difference(-1.0, 0.0, 8).is_err());
    }

    #[test]
    fn pair_overhead_covers_every_small_difference() {
        for (n, m) in [(3usize, 2u32), (4, 2), (8, 1)] {
            let total = 1u64 << (n as u32 * m);
            let vecs: Vec<QuantizedVector> = (0..total)
                .map(|v| {
                    let num = (0..n).map(|i| (v >> (i as u32 * m)) & ((1 << m) - 1)).collect();
                    QuantizedVector::from_numerators(num, m).unwrap()
                })
                .collect();
            let dl: Vec<u64> = vecs.iter().map(|x| dl_surrogate(x).unwrap().0).collect();
            for (i, x) in vecs.iter().enumerate() {
                for (j, y) in vecs.iter().enumerate() {
                    let diff = x.wrapping_sub(y).unwrap();
                    let k: usize =
                        diff.numerators().iter().enumerate().map(|(t, &v)| (v as usize) << (t as u32 * m)).sum();
                    assert!(dl[k] <= dl[i] + dl[j] + PAIR_OVERHEAD, "n={n} m={m} {x:?} {y:?}");
                }
            }
        }
    }

    #[test]
    fn sparse_length_is_subadditive() {
        for n in [2usize, 16, 256, 1024, 4096] {
            for m in [1u32, 8, 16] {
                for k1 in 0..=n.min(40) {
                    for k2 in 0..=(n - k1).min(40) {
                        let joint = sparse::sparse_len(k1 + k2, n, m);
                        assert!(joint <= sparse::sparse_len(k1, n, m) + sparse::sparse_len(k2, n, m));
                    }
                }
            }
        }
    }
}
