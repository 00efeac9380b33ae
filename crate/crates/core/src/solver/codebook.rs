//! Ordered enumeration of every codeword up to a description-length budget.

use std::collections::HashSet;

use crate::bits::BitString;
use crate::codecs::literal::encode_literal;
use crate::codecs::piecewise::{coefficient_bits, pp_len, QuantizedPoly};
use crate::codecs::sparse::{sparse_len, write_sparse};
use crate::codecs::{uint, CodecId, DlBudget};
use crate::error::{McpError, Result};
use crate::quantize::QuantizedVector;
use crate::signals::SignalClassSpec;

/// Default bound on enumerated or examined candidates.
pub const DEFAULT_CANDIDATE_CAP: u64 = 1 << 24;

/// One structural slice of a codec's codebook; all members share a length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Sparse { k: usize },
    Piecewise { q: usize, degree: usize },
    Literal,
}

impl Group {
    pub fn codec(&self) -> CodecId {
        match self {
            Group::Sparse { .. } => CodecId::Sparse,
            Group::Piecewise { .. } => CodecId::PiecewisePoly,
            Group::Literal => CodecId::Literal,
        }
    }

    pub fn dl_bits(&self, n: usize, m: u32) -> u64 {
        match *self {
            Group::Sparse { k } => sparse_len(k, n, m),
            Group::Piecewise { q, degree } => pp_len(q, degree, n, m),
            Group::Literal => {
                CodecId::Literal.tag().len() as u64 + uint::encoded_len(n as u64) as u64 + (n as u64) * m as u64
            }
        }
    }

    /// Fields shared by every member; groups of equal length are ordered by
    /// these bits, since no member of one group can be a prefix-sibling of
    /// another's.
    pub fn header(&self, n: usize) -> BitString {
        let mut out = BitString::new();
        for &b in self.codec().tag() {
            out.push(b);
        }
        uint::write_uint(&mut out, n as u64);
        match *self {
            Group::Sparse { k } => uint::write_uint(&mut out, k as u64 + 1),
            Group::Piecewise { q, degree } => {
                uint::write_uint(&mut out, degree as u64 + 1);
                uint::write_uint(&mut out, q as u64 + 1);
            }
            Group::Literal => {}
        }
        out
    }

    /// Number of codewords in the group.
    pub fn size(&self, n: usize, m: u32) -> u128 {
        match *self {
            Group::Sparse { k } => {
                binomial(n as u128, k as u128).saturating_mul(((1u128 << m) - 1).saturating_pow(k as u32))
            }
            Group::Piecewise { q, degree } => {
                let big_m = 1u128 << coefficient_bits(m, degree);
                // tuples of degree+1 nonnegative integers summing below 2^m'
                let per_piece = binomial(big_m + degree as u128, degree as u128 + 1);
                binomial(n as u128 - 1, q as u128).saturating_mul(per_piece.saturating_pow(q as u32 + 1))
            }
            Group::Literal => (1u128 << m).saturating_pow(n as u32),
        }
    }

    /// Members in stream order.
    pub fn members(self, n: usize, m: u32) -> Box<dyn Iterator<Item = (QuantizedVector, BitString)>> {
        match self {
            Group::Sparse { k } => {
                let top = (1u64 << m) - 1;
                Box::new(Combinations::new(0, n, k).flat_map(move |pos| {
                    Odometer::new(k, 1, top).map(move |vals| {
                        let mut num = vec![0u64; n];
                        for (&p, &v) in pos.iter().zip(&vals) {
                            num[p] = v;
                        }
                        let stream = write_sparse(n, m, &pos, &vals);
                        (QuantizedVector::from_numerators(num, m).expect("in range"), stream)
                    })
                }))
            }
            Group::Piecewise { q, degree } => {
                let tuples = piece_tuples(degree, coefficient_bits(m, degree));
                Box::new(Combinations::new(1, n, q).flat_map(move |bps| {
                    let tuples = tuples.clone();
                    Odometer::new(q + 1, 0, tuples.len() as u64 - 1).map(move |pick| {
                        let poly = QuantizedPoly {
                            breakpoints: bps.clone(),
                            degree,
                            numerators: pick.iter().map(|&i| tuples[i as usize].clone()).collect(),
                        };
                        let v = poly.render(n, m).expect("codebook polynomials render exactly");
                        (v, poly.write(n, m))
                    })
                }))
            }
            Group::Literal => {
                let top = (1u64 << m) - 1;
                Box::new(Odometer::new(n, 0, top).map(move |num| {
                    let v = QuantizedVector::from_numerators(num, m).expect("in range");
                    let s = encode_literal(&v).expect("literal always encodes").payload;
                    (v, s)
                }))
            }
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All `(degree+1)`-tuples over `0..2^bits` with sum below `2^bits`, in
/// lexicographic order.
fn piece_tuples(degree: usize, bits: u32) -> Vec<Vec<u64>> {
    let limit = 1u64 << bits;
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(degree + 1);
    fn rec(cur: &mut Vec<u64>, left: u64, slots: usize, out: &mut Vec<Vec<u64>>) {
        if slots == 0 {
            out.push(cur.clone());
            return;
        }
        for v in 0..left {
            cur.push(v);
            rec(cur, left - v, slots - 1, out);
            cur.pop();
        }
    }
    rec(&mut cur, limit, degree + 1, &mut out);
    out
}

/// Increasing `k`-tuples from `lo..hi`, lexicographic.
pub(crate) struct Combinations {
    hi: usize,
    cur: Option<Vec<usize>>,
}

impl Combinations {
    pub(crate) fn new(lo: usize, hi: usize, k: usize) -> Self {
        let cur = if lo + k <= hi { Some((lo..lo + k).collect()) } else { None };
        Combinations { hi, cur }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.cur.clone()?;
        let cur = self.cur.as_mut().unwrap();
        let k = cur.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            if cur[i] < self.hi - (k - i) {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Every `len`-tuple over `lo..=hi`, lexicographic.
pub(crate) struct Odometer {
    lo: u64,
    hi: u64,
    cur: Option<Vec<u64>>,
}

impl Odometer {
    pub(crate) fn new(len: usize, lo: u64, hi: u64) -> Self {
        let cur = if lo <= hi { Some(vec![lo; len]) } else { None };
        Odometer { lo, hi, cur }
    }
}

impl Iterator for Odometer {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let out = self.cur.clone()?;
        let cur = self.cur.as_mut().unwrap();
        let mut i = cur.len();
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            if cur[i] < self.hi {
                cur[i] += 1;
                for v in cur[i + 1..].iter_mut() {
                    *v = self.lo;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Which codec groups to enumerate for a set of signal classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CodecSelection {
    pub sparse: bool,
    pub piecewise: bool,
    pub literal: bool,
}

impl CodecSelection {
    /// Sparse and l_p-ball classes use the sparse codec; piecewise-polynomial
    /// and smooth classes use the piecewise codec.
    pub fn for_classes(classes: &[SignalClassSpec]) -> Self {
        let mut sel = CodecSelection::default();
        for c in classes {
            match c {
                SignalClassSpec::Sparse { .. } | SignalClassSpec::LpBall { .. } => sel.sparse = true,
                SignalClassSpec::PiecewisePoly { .. } | SignalClassSpec::Smooth { .. } => sel.piecewise = true,
            }
        }
        sel
    }

    pub fn with_literal(mut self, on: bool) -> Self {
        self.literal = on;
        self
    }

    pub fn is_empty(&self) -> bool {
        !(self.sparse || self.piecewise || self.literal)
    }
}

/// Groups with length within budget, in `(length, header)` order.
pub fn groups_within(sel: CodecSelection, n: usize, m: u32, budget: DlBudget) -> Vec<(u64, BitString, Group)> {
    let mut out = Vec::new();
    let b = budget.bits();
    if sel.sparse {
        for k in 0..=n {
            let g = Group::Sparse { k };
            let dl = g.dl_bits(n, m);
            if dl > b {
                break;
            }
            out.push((dl, g.header(n), g));
        }
    }
    if sel.piecewise {
        let mut degree = 0;
        while (Group::Piecewise { q: 0, degree }).dl_bits(n, m) <= b {
            for q in 0..n {
                let g = Group::Piecewise { q, degree };
                let dl = g.dl_bits(n, m);
                if dl > b {
                    break;
                }
                out.push((dl, g.header(n), g));
            }
            degree += 1;
        }
    }
    if sel.literal {
        let g = Group::Literal;
        let dl = g.dl_bits(n, m);
        if dl <= b {
            out.push((dl, g.header(n), g));
        }
    }
    out.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    out
}

/// A decodable vector together with its codeword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodebookEntry {
    pub codec: CodecId,
    pub dl_bits: u64,
    pub vector: QuantizedVector,
    pub stream: BitString,
}

/// Every vector with a codeword of length `<= budget`, once per codec (its
/// shortest, then lexicographically first, codeword), in nondecreasing
/// length order with ties broken by stream order.
pub fn enumerate_codebook(
    classes: &[SignalClassSpec],
    n: usize,
    m: u32,
    budget: DlBudget,
) -> Result<impl Iterator<Item = CodebookEntry>> {
    enumerate_codebook_with(CodecSelection::for_classes(classes), n, m, budget, DEFAULT_CANDIDATE_CAP)
}

pub fn enumerate_codebook_with(
    sel: CodecSelection,
    n: usize,
    m: u32,
    budget: DlBudget,
    cap: u64,
) -> Result<impl Iterator<Item = CodebookEntry>> {
    if n == 0 || m == 0 {
        return Err(McpError::Domain("n and m must be positive".into()));
    }
    let groups = groups_within(sel, n, m, budget);
    let total = groups.iter().fold(0u128, |acc, (_, _, g)| acc.saturating_add(g.size(n, m)));
    if total > cap as u128 {
        return Err(McpError::Resource { needed: total, cap });
    }
    let mut seen: HashSet<(CodecId, QuantizedVector)> = HashSet::new();
    Ok(groups
        .into_iter()
        .flat_map(move |(dl, _, g)| {
            let codec = g.codec();
            g.members(n, m).map(move |(vector, stream)| CodebookEntry { codec, dl_bits: dl, vector, stream })
        })
        .filter(move |e| seen.insert((e.codec, e.vector.clone()))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::{decode, CodedSignal};

    #[test]
    fn combinations_and_odometer() {
        let c: Vec<Vec<usize>> = Combinations::new(0, 4, 2).collect();
        assert_eq!(c, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(Combinations::new(0, 3, 0).count(), 1);
        assert_eq!(Combinations::new(1, 3, 3).count(), 0);
        let o: Vec<Vec<u64>> = Odometer::new(2, 1, 2).collect();
        assert_eq!(o, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
        assert_eq!(Odometer::new(0, 1, 2).count(), 1);
        assert_eq!(binomial(256, 2), 32640);
        assert_eq!(piece_tuples(1, 2).len(), binomial(5, 2) as usize);
    }

    #[test]
    fn budget_below_header_is_empty() {
        let sel = CodecSelection { sparse: true, piecewise: true, literal: true };
        let min = Group::Sparse { k: 0 }.dl_bits(4, 1);
        assert_eq!(enumerate_codebook_with(sel, 4, 1, DlBudget(min - 1), 1 << 20).unwrap().count(), 0);
    }

    #[test]
    fn sparse_n4_m1_matches_hand_list() {
        // k = 0: 0 + 0101... header only; k = 1 adds 2 position bits + 1 value bit.
        let k0 = Group::Sparse { k: 0 }.dl_bits(4, 1);
        let k1 = Group::Sparse { k: 1 }.dl_bits(4, 1);
        assert_eq!((k0, k1), (1 + 5 + 1, 1 + 5 + 4 + 2 + 1));
        let got: Vec<(u64, Vec<u64>)> = enumerate_codebook(&[SignalClassSpec::Sparse { k: 1 }], 4, 1, DlBudget(k1))
            .unwrap()
            .map(|e| (e.dl_bits, e.vector.numerators().to_vec()))
            .collect();
        let want = vec![
            (k0, vec![0, 0, 0, 0]),
            (k1, vec![1, 0, 0, 0]),
            (k1, vec![0, 1, 0, 0]),
            (k1, vec![0, 0, 1, 0]),
            (k1, vec![0, 0, 0, 1]),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn stream_is_sorted_and_decodes() {
        let sel = CodecSelection { sparse: true, piecewise: true, literal: true };
        let entries: Vec<CodebookEntry> = enumerate_codebook_with(sel, 5, 2, DlBudget(24), 1 << 22).unwrap().collect();
        assert!(!entries.is_empty());
        for w in entries.windows(2) {
            assert!((w[0].dl_bits, &w[0].stream) < (w[1].dl_bits, &w[1].stream));
        }
        let mut per_codec = HashSet::new();
        for e in &entries {
            assert_eq!(e.stream.len() as u64, e.dl_bits);
            let c = CodedSignal { codec: e.codec, payload: e.stream.clone() };
            assert_eq!(decode(&c, 5, 2).unwrap(), e.vector);
            assert!(per_codec.insert((e.codec, e.vector.clone())));
        }
        assert!((entries.len() as u128) < 1u128 << 25);
    }

    #[test]
    fn group_sizes_match_member_counts() {
        for g in [
            Group::Sparse { k: 2 },
            Group::Piecewise { q: 1, degree: 1 },
            Group::Piecewise { q: 0, degree: 2 },
            Group::Literal,
        ] {
            assert_eq!(g.members(4, 2).count() as u128, g.size(4, 2), "{g:?}");
        }
    }

    #[test]
    fn cap_is_enforced() {
        let sel = CodecSelection { sparse: true, ..Default::default() };
        let err = enumerate_codebook_with(sel, 64, 8, DlBudget(200), 1000).err().unwrap();
        assert!(matches!(err, McpError::Resource { .. }));
    }
}
