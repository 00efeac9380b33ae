//! Piecewise-polynomial codec.
//!
//! Sample `j` of an `n`-vector sits at `t = j/n`. Piece `l` covers samples
//! from breakpoint `l` (or 0) up to the next breakpoint, and evaluates
//! `sum_i a_i t^i` in the global variable `t`. Coefficients lie in `[0, 1]`
//! with per-piece sum below one, so every sample lies in `[0, 1)`.
//!
//! Layout: `[tag 10][uint n][uint N+1][uint Q+1][Q breakpoints, ceil(log2 n)
//! bits each, strictly increasing in 1..n][(Q+1)(N+1) coefficients, m' bits
//! each]` with `m' = m + ceil(log2(N+1))`, so the coefficient truncation
//! perturbs each sample by less than `2^-m`.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::codecs::{position_width, read_preamble, uint, write_preamble, CodecId, CodedSignal};
use crate::codecs::{PP_BREAKPOINT_OVERHEAD, PP_MODEL_OVERHEAD, UINT_OVERHEAD};
use crate::error::{McpError, Result};
use crate::quantize::{truncate_bits, QuantizedVector, MAX_BITS};

/// A function in `Poly_N^Q`: breakpoints in `(0, 1)` on the sample grid and
/// one coefficient list (constant term first) per piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    pub breakpoints: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn degree(&self) -> usize {
        self.coefficients.iter().map(|c| c.len().saturating_sub(1)).max().unwrap_or(0)
    }

    pub fn num_breakpoints(&self) -> usize {
        self.breakpoints.len()
    }

    /// Evaluates at `t`; points exactly on a breakpoint belong to the right piece.
    pub fn eval(&self, t: f64) -> f64 {
        let piece = self.breakpoints.iter().take_while(|&&b| b <= t).count();
        self.coefficients[piece].iter().rev().fold(0.0, |acc, &a| acc * t + a)
    }

    pub fn samples(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.eval(j as f64 / n as f64)).collect()
    }

    /// Breakpoints as sample indices; errors if any is off the grid.
    pub fn grid_breakpoints(&self, n: usize) -> Result<Vec<usize>> {
        let mut out: Vec<usize> = Vec::with_capacity(self.breakpoints.len());
        for &b in &self.breakpoints {
            let j = (b * n as f64).round();
            if !(j >= 1.0 && j < n as f64) || j / n as f64 != b {
                return Err(McpError::Encode(format!("breakpoint {b} is not an interior grid point for n = {n}")));
            }
            let j = j as usize;
            if out.last().is_some_and(|&p| j <= p) {
                return Err(McpError::Encode("breakpoints must be strictly increasing".into()));
            }
            out.push(j);
        }
        Ok(out)
    }
}

/// Coefficient resolution `m' = m + ceil(log2(N+1))`.
pub fn coefficient_bits(m: u32, degree: usize) -> u32 {
    m + uint::ceil_log2(degree as u64 + 1)
}

/// Coefficients already quantized to `m'` bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct QuantizedPoly {
    pub breakpoints: Vec<usize>,
    pub degree: usize,
    pub numerators: Vec<Vec<u64>>,
}

impl QuantizedPoly {
    pub fn write(&self, n: usize, m: u32) -> BitString {
        let mut out = BitString::new();
        write_preamble(&mut out, CodecId::PiecewisePoly, n);
        uint::write_uint(&mut out, self.degree as u64 + 1);
        uint::write_uint(&mut out, self.breakpoints.len() as u64 + 1);
        let w = position_width(n);
        for &b in &self.breakpoints {
            out.push_bits(b as u64, w);
        }
        let mb = coefficient_bits(m, self.degree);
        for piece in &self.numerators {
            for &a in piece {
                out.push_bits(a, mb);
            }
        }
        out
    }

    /// `[f_hat(j/n)]_m` in exact integer arithmetic.
    pub fn render(&self, n: usize, m: u32) -> Result<QuantizedVector> {
        let mb = coefficient_bits(m, self.degree);
        let overflow = || McpError::Domain("piecewise polynomial too large for exact evaluation".into());
        let nn = n as u128;
        let deg = self.degree as u32;
        let denom = nn.checked_pow(deg).and_then(|p| p.checked_mul(1u128 << (mb - m))).ok_or_else(overflow)?;
        let mut out = Vec::with_capacity(n);
        let mut piece = 0;
        for j in 0..n {
            while piece < self.breakpoints.len() && self.breakpoints[piece] <= j {
                piece += 1;
            }
            // sum_i a_i j^i n^(N-i), over 2^(m'-m) n^N
            let mut acc: u128 = 0;
            for (i, &a) in self.numerators[piece].iter().enumerate() {
                let term = (j as u128)
                    .checked_pow(i as u32)
                    .and_then(|p| p.checked_mul(nn.checked_pow(deg - i as u32)?))
                    .and_then(|p| p.checked_mul(a as u128))
                    .ok_or_else(overflow)?;
                acc = acc.checked_add(term).ok_or_else(overflow)?;
            }
            out.push((acc / denom) as u64);
        }
        QuantizedVector::from_numerators(out, m)
    }
}

pub(crate) fn pp_len(q: usize, degree: usize, n: usize, m: u32) -> u64 {
    CodecId::PiecewisePoly.tag().len() as u64
        + uint::encoded_len(n as u64) as u64
        + uint::encoded_len(degree as u64 + 1) as u64
        + uint::encoded_len(q as u64 + 1) as u64
        + q as u64 * position_width(n) as u64
        + ((q + 1) * (degree + 1)) as u64 * coefficient_bits(m, degree) as u64
}

fn quantize_poly(spec: &PiecewisePoly, n: usize, m: u32) -> Result<QuantizedPoly> {
    let breakpoints = spec.grid_breakpoints(n)?;
    if spec.coefficients.len() != breakpoints.len() + 1 {
        return Err(McpError::Encode(format!(
            "{} breakpoints need {} pieces, got {}",
            breakpoints.len(),
            breakpoints.len() + 1,
            spec.coefficients.len()
        )));
    }
    let degree = spec.degree();
    let mb = coefficient_bits(m, degree);
    if mb > MAX_BITS {
        return Err(McpError::Encode(format!("coefficient resolution {mb} exceeds {MAX_BITS} bits")));
    }
    let mut numerators = Vec::with_capacity(spec.coefficients.len());
    for (l, piece) in spec.coefficients.iter().enumerate() {
        if piece.is_empty() {
            return Err(McpError::Encode(format!("piece {l} has no coefficients")));
        }
        if piece.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(McpError::Encode(format!("piece {l} has a coefficient outside [0, 1]")));
        }
        if piece.iter().sum::<f64>() >= 1.0 {
            return Err(McpError::Encode(format!("piece {l} coefficient sum is not below 1")));
        }
        let mut q: Vec<u64> =
            piece.iter().map(|&a| truncate_bits(a, mb).map(|d| d.numerator())).collect::<Result<_>>()?;
        q.resize(degree + 1, 0);
        numerators.push(q);
    }
    Ok(QuantizedPoly { breakpoints, degree, numerators })
}

pub fn encode_piecewise_poly(spec: &PiecewisePoly, n: usize, m: u32) -> Result<CodedSignal> {
    let q = quantize_poly(spec, n, m)?;
    // rejects specs too large to evaluate exactly
    q.render(n, m)?;
    Ok(CodedSignal { codec: CodecId::PiecewisePoly, payload: q.write(n, m) })
}

pub(crate) fn parse_piecewise_poly(c: &CodedSignal, n: usize, m: u32) -> Result<QuantizedPoly> {
    if c.codec != CodecId::PiecewisePoly {
        return Err(McpError::Decode(format!("expected piecewise_poly stream, got {}", c.codec)));
    }
    let mut r = c.payload.reader();
    read_preamble(&mut r, CodecId::PiecewisePoly, n)?;
    let degree = uint::read_uint(&mut r)? - 1;
    let q = uint::read_uint(&mut r)? - 1;
    if q >= n as u64 {
        return Err(McpError::Decode(format!("{q} breakpoints do not fit {n} samples")));
    }
    let mb = m as u64 + uint::ceil_log2(degree + 1) as u64;
    if mb > MAX_BITS as u64 {
        return Err(McpError::Decode(format!("degree {degree} too large")));
    }
    let (degree, q, mb) = (degree as usize, q as usize, mb as u32);
    let w = position_width(n);
    let mut breakpoints = Vec::with_capacity(q);
    for _ in 0..q {
        let b = r.read_bits(w)? as usize;
        if b == 0 || b >= n || breakpoints.last().is_some_and(|&p| b <= p) {
            return Err(McpError::Decode(format!("invalid breakpoint {b}")));
        }
        breakpoints.push(b);
    }
    let mut numerators = Vec::with_capacity(q + 1);
    for l in 0..=q {
        let piece: Vec<u64> = (0..=degree).map(|_| r.read_bits(mb)).collect::<Result<_>>()?;
        if piece.iter().map(|&a| a as u128).sum::<u128>() >= 1u128 << mb {
            return Err(McpError::Decode(format!("piece {l} coefficient sum is not below 1")));
        }
        numerators.push(piece);
    }
    r.expect_end()?;
    Ok(QuantizedPoly { breakpoints, degree, numerators })
}

pub fn decode_piecewise_poly(c: &CodedSignal, n: usize, m: u32) -> Result<QuantizedVector> {
    parse_piecewise_poly(c, n, m)?.render(n, m).map_err(|e| McpError::Decode(e.to_string()))
}

/// Piecewise-constant description of `x`, one piece per run of equal values.
pub fn fit_piecewise_constant(x: &QuantizedVector) -> Result<PiecewisePoly> {
    let n = x.len();
    if n == 0 {
        return Err(McpError::Encode("empty vector".into()));
    }
    let scale = (1u64 << x.bits()) as f64;
    let num = x.numerators();
    let mut breakpoints = Vec::new();
    let mut coefficients = vec![vec![num[0] as f64 / scale]];
    for j in 1..n {
        if num[j] != num[j - 1] {
            breakpoints.push(j as f64 / n as f64);
            coefficients.push(vec![num[j] as f64 / scale]);
        }
    }
    Ok(PiecewisePoly { breakpoints, coefficients })
}

/// Upper bound on the piecewise-polynomial stream length:
/// `(Q+1)(N+1)(m + ceil(log2(N+1))) + (Q+1)(ceil(log* n) + c)
///  + ceil(log* n) + ceil(log* (N+1)) + ceil(log* (Q+1)) + c1 + c2`.
pub fn pp_dl_bound(q: usize, degree: usize, n: usize, m: u32) -> Result<f64> {
    let ls = |v: u64| uint::ceil_log_star(v).map(|x| x as f64);
    let pieces = (q + 1) as f64;
    Ok(pieces * (degree + 1) as f64 * coefficient_bits(m, degree) as f64
        + pieces * (ls(n as u64)? + UINT_OVERHEAD as f64)
        + ls(n as u64)?
        + ls(degree as u64 + 1)?
        + ls(q as u64 + 1)?
        + PP_MODEL_OVERHEAD as f64
        + PP_BREAKPOINT_OVERHEAD as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::quantize_vector;
    use proptest::prelude::*;

    #[test]
    fn constant_piece() {
        let spec = PiecewisePoly { breakpoints: vec![], coefficients: vec![vec![0.5]] };
        let c = encode_piecewise_poly(&spec, 16, 4).unwrap();
        // 2 + uint(16) + uint(1) + uint(1) + one 4-bit coefficient
        assert_eq!(c.dl_bits(), 2 + 9 + 1 + 1 + 4);
        let x = decode_piecewise_poly(&c, 16, 4).unwrap();
        assert!(x.to_f64().iter().all(|&v| v == 0.5));
        assert!(c.dl_bits() as f64 <= pp_dl_bound(0, 0, 16, 4).unwrap());
    }

    #[test]
    fn two_affine_pieces_spend_twenty_coefficient_bits() {
        let spec = PiecewisePoly { breakpoints: vec![0.5], coefficients: vec![vec![0.25, 0.5], vec![0.75, 0.125]] };
        let c = encode_piecewise_poly(&spec, 16, 4).unwrap();
        let header = 2 + uint::encoded_len(16) + uint::encoded_len(2) + uint::encoded_len(2) + 4;
        assert_eq!(c.dl_bits() as usize, header + 4 * 5);
        assert_eq!(coefficient_bits(4, 1), 5);
        let bound = pp_dl_bound(1, 1, 16, 4).unwrap();
        // 2*2*5 + 2*(ceil log* 16 + 4) + ceil log* 16 + ceil log* 2 + ceil log* 2 + 8
        assert_eq!(bound, 20.0 + 2.0 * 12.0 + 8.0 + 1.0 + 1.0 + 8.0);
        assert!(c.dl_bits() as f64 <= bound);
        // dyadic coefficients at m' bits: decode is the exact m-bit truncation
        let x = decode_piecewise_poly(&c, 16, 4).unwrap();
        assert_eq!(x, quantize_vector(&spec.samples(16), 4).unwrap());
    }

    #[test]
    fn bound_leading_term() {
        let r: Vec<f64> = [8u32, 32, 40, 60].iter().map(|&m| pp_dl_bound(2, 3, 64, m).unwrap() / m as f64).collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!((r[3] - 12.0).abs() < 2.0);
    }

    #[test]
    fn encode_errors() {
        let off = PiecewisePoly { breakpoints: vec![0.3], coefficients: vec![vec![0.1], vec![0.2]] };
        assert!(matches!(encode_piecewise_poly(&off, 16, 4), Err(McpError::Encode(_))));
        let heavy = PiecewisePoly { breakpoints: vec![], coefficients: vec![vec![0.5, 0.5]] };
        assert!(matches!(encode_piecewise_poly(&heavy, 16, 4), Err(McpError::Encode(_))));
        let unordered = PiecewisePoly { breakpoints: vec![0.5, 0.25], coefficients: vec![vec![0.1]; 3] };
        assert!(encode_piecewise_poly(&unordered, 16, 4).is_err());
        let wrong_pieces = PiecewisePoly { breakpoints: vec![0.5], coefficients: vec![vec![0.1]] };
        assert!(encode_piecewise_poly(&wrong_pieces, 16, 4).is_err());
    }

    #[test]
    fn rejects_heavy_coefficients_in_stream() {
        let bad = QuantizedPoly { breakpoints: vec![], degree: 1, numerators: vec![vec![20, 12]] };
        let c = CodedSignal { codec: CodecId::PiecewisePoly, payload: bad.write(8, 4) };
        assert!(decode_piecewise_poly(&c, 8, 4).is_err());
    }

    #[test]
    fn piecewise_constant_fit_roundtrips() {
        let x = QuantizedVector::from_numerators(vec![3, 3, 0, 0, 0, 7, 7, 1], 3).unwrap();
        let fit = fit_piecewise_constant(&x).unwrap();
        assert_eq!(fit.num_breakpoints(), 3);
        let c = encode_piecewise_poly(&fit, 8, 3).unwrap();
        assert_eq!(decode_piecewise_poly(&c, 8, 3).unwrap(), x);
    }

    fn arb_poly() -> impl Strategy<Value = (usize, u32, PiecewisePoly)> {
        (4usize..64, 1u32..12, 0usize..4, 0usize..4).prop_flat_map(|(n, m, q, deg)| {
            let q = q.min(n - 1);
            (
                Just(n),
                Just(m),
                proptest::sample::subsequence((1..n).collect::<Vec<_>>(), q),
                proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, deg + 1), q + 1),
            )
                .prop_map(|(n, m, bps, raw)| {
                    let coefficients = raw
                        .into_iter()
                        .map(|c| {
                            let s: f64 = c.iter().sum::<f64>() * 1.01 + 1e-9;
                            c.into_iter().map(|a| a / s).collect()
                        })
                        .collect();
                    let breakpoints = bps.into_iter().map(|b| b as f64 / n as f64).collect();
                    (n, m, PiecewisePoly { breakpoints, coefficients })
                })
        })
    }

    proptest! {
        #[test]
        fn roundtrip_bound_and_sample_error((n, m, spec) in arb_poly()) {
            let c = encode_piecewise_poly(&spec, n, m).unwrap();
            let x = decode_piecewise_poly(&c, n, m).unwrap();
            prop_assert!(c.dl_bits() as f64 <= pp_dl_bound(spec.num_breakpoints(), spec.degree(), n, m).unwrap());
            prop_assert_eq!(c.dl_bits(), pp_len(spec.num_breakpoints(), spec.degree(), n, m));
            let q = parse_piecewise_poly(&c, n, m).unwrap();
            prop_assert_eq!(q.write(n, m), c.payload.clone());
            // reconstructed polynomial (before truncation) is within 2^-m of the truth
            let mb = coefficient_bits(m, spec.degree());
            let scale = (mb as f64).exp2();
            for (j, &truth) in spec.samples(n).iter().enumerate() {
                let t = j as f64 / n as f64;
                let piece = q.breakpoints.iter().take_while(|&&b| b <= j).count();
                let approx: f64 = q.numerators[piece].iter().rev().fold(0.0, |acc, &a| acc * t + a as f64 / scale);
                prop_assert!((truth - approx).abs() < (-(m as f64)).exp2());
                let rendered = x.entry(j).value();
                prop_assert!(approx - rendered >= -1e-12 && approx - rendered < (-(m as f64)).exp2() + 1e-12);
            }
        }
    }
}
