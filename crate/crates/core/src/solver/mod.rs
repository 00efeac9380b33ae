//! Minimum-description-length recovery by budgeted codebook search.
//!
//! Groups of the codebook are visited in `(length, header)` order and the
//! first feasible member of the first group holding one is returned, which is
//! the lexicographically-first codeword of minimal length. Sparse groups are
//! searched support by support: a least-squares screen discards supports
//! whose best real-valued fit already misses the tolerance, and the survivors
//! have only the lattice points inside their feasibility ellipsoid tested.

mod codebook;
mod linalg;

use serde::Serialize;

pub use codebook::{
    enumerate_codebook, enumerate_codebook_with, groups_within, CodebookEntry, CodecSelection, Group,
    DEFAULT_CANDIDATE_CAP,
};
pub(crate) use codebook::{Combinations, Odometer};

use crate::codecs::{CodecId, DlBudget};
use crate::error::{McpError, Result};
use crate::measure::MeasurementEnsemble;
use crate::quantize::{quantization_gap_bound, QuantizedVector};
use crate::signals::{l2_distance, SignalClassSpec};

/// How much residual slack quantization is granted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Slack {
    /// `sigma_max * sqrt(n 2^(-2m+1))`.
    Dense,
    /// `sigma_max * sqrt(s) 2^(-m)`: the truncation error of a signal with at
    /// most `s` nonzero entries.
    Support { s: usize },
}

impl Slack {
    pub fn eta(&self, sigma_max: f64, n: usize, m: u32) -> f64 {
        match *self {
            Slack::Dense => sigma_max * quantization_gap_bound(n, m),
            Slack::Support { s } => sigma_max * (s as f64).sqrt() * (-(m as f64)).exp2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub codecs: CodecSelection,
    pub m: u32,
    pub budget: DlBudget,
    pub candidate_cap: u64,
    /// Keep every candidate whose residual was evaluated.
    pub record_examined: bool,
}

impl SolverConfig {
    pub fn new(classes: &[SignalClassSpec], m: u32, budget: DlBudget) -> Self {
        SolverConfig {
            codecs: CodecSelection::for_classes(classes),
            m,
            budget,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            record_examined: false,
        }
    }

    pub fn with_literal(mut self, on: bool) -> Self {
        self.codecs = self.codecs.with_literal(on);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    pub feasible: bool,
    /// Dequantized estimate; empty when infeasible.
    pub x_hat: Vec<f64>,
    #[serde(skip)]
    pub quantized: Option<QuantizedVector>,
    pub codec: Option<CodecId>,
    pub dl_bits: Option<u64>,
    pub residual: Option<f64>,
    /// Residual tolerance of the program that was solved.
    pub threshold: f64,
    pub l2_error: Option<f64>,
    pub predicted_bound: Option<f64>,
    pub within_bound: Option<bool>,
    pub candidates_examined: u64,
    pub supports_screened: u64,
    #[serde(skip)]
    pub examined: Vec<QuantizedVector>,
}

impl RecoveryResult {
    /// Fills the error against `truth` and whether it stays under `bound`.
    pub fn evaluate(&mut self, truth: &[f64], bound: f64) -> Result<()> {
        if !self.feasible {
            self.predicted_bound = Some(bound);
            self.within_bound = Some(false);
            return Ok(());
        }
        if truth.len() != self.x_hat.len() {
            return Err(McpError::DimensionMismatch { expected: self.x_hat.len(), got: truth.len() });
        }
        let err = l2_distance(&self.x_hat, truth);
        self.l2_error = Some(err);
        self.predicted_bound = Some(bound);
        self.within_bound = Some(err <= bound);
        Ok(())
    }
}

/// `min dl(x)` subject to `||A x - y|| <= eta` over the configured codebook.
pub fn mcp_exact(a: &MeasurementEnsemble, y: &[f64], cfg: &SolverConfig, eta: f64) -> Result<RecoveryResult> {
    if y.len() != a.rows() {
        return Err(McpError::Domain(format!("measurement has length {}, expected {}", y.len(), a.rows())));
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(McpError::Domain(format!("tolerance must be finite and nonnegative, got {eta}")));
    }
    if cfg.m == 0 || cfg.m > 32 {
        return Err(McpError::Domain(format!("solver supports 1..=32 bits, got {}", cfg.m)));
    }
    if cfg.codecs.is_empty() {
        return Err(McpError::Config("no codec selected for the search".into()));
    }
    let n = a.cols();
    let groups = groups_within(cfg.codecs, n, cfg.m, cfg.budget);
    if groups.is_empty() {
        return Err(McpError::Domain(format!("budget {} is below every codec header", cfg.budget.bits())));
    }
    let mut s = Search::new(a, y, cfg, eta);
    for (dl, _, g) in groups {
        let hit = match g {
            Group::Sparse { k } => s.sparse_group(k)?,
            other => s.brute_group(other)?,
        };
        if let Some(v) = hit {
            return Ok(s.finish(Some((v, g.codec(), dl))));
        }
    }
    Ok(s.finish(None))
}

/// `min dl(x)` subject to `||A x - y|| <= sigma_max epsilon + slack`.
pub fn mcp_tolerant(
    a: &MeasurementEnsemble,
    y: &[f64],
    epsilon: f64,
    cfg: &SolverConfig,
    slack: Slack,
) -> Result<RecoveryResult> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(McpError::Domain(format!("epsilon must be finite and nonnegative, got {epsilon}")));
    }
    let sigma = a.sigma_max();
    mcp_exact(a, y, cfg, sigma * epsilon + slack.eta(sigma, a.cols(), cfg.m))
}

/// `(tau^-1 (sqrt(n/d) + 1 + t) + 1) sqrt(n 2^(-2m+1))`.
pub fn predicted_error_bound(n: usize, d: usize, m: u32, tau: f64, t: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) || !(t > 0.0) || d == 0 {
        return Err(McpError::Domain(format!("need tau in (0,1), t > 0, d > 0; got tau={tau}, t={t}, d={d}")));
    }
    let sigma = (n as f64 / d as f64).sqrt() + 1.0 + t;
    Ok((sigma / tau + 1.0) * quantization_gap_bound(n, m))
}

/// Error bound for the tolerant program on `E1 & E2` when the signal lies
/// within `epsilon` of a codebook-representable `x_tilde`:
/// `epsilon + tau^-1 sigma (gap + 2 epsilon) + gap` with
/// `sigma = sqrt(n/d) + 1 + t`.
pub fn mismatch_error_bound(n: usize, d: usize, m: u32, tau: f64, t: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(McpError::Domain(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let base = predicted_error_bound(n, d, m, tau, t)?;
    let sigma = (n as f64 / d as f64).sqrt() + 1.0 + t;
    Ok(base + epsilon * (1.0 + 2.0 * sigma / tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorollaryBound {
    pub error_bound: f64,
    pub failure_probability: f64,
}

/// `10 n^(1/2 - alpha) / (sqrt(kappa) log2 n)` and `n^(-alpha kappa)`.
pub fn corollary_error_bound(n: usize, alpha: f64, kappa: f64) -> Result<CorollaryBound> {
    if n < 2 || !(alpha > 0.0) || !(kappa > 0.0) {
        return Err(McpError::Domain(format!("need n >= 2, alpha > 0, kappa > 0; got {n}, {alpha}, {kappa}")));
    }
    let nf = n as f64;
    Ok(CorollaryBound {
        error_bound: 10.0 * nf.powf(0.5 - alpha) / (kappa.sqrt() * nf.log2()),
        failure_probability: nf.powf(-alpha * kappa),
    })
}

struct Search<'a> {
    a: &'a MeasurementEnsemble,
    y: &'a [f64],
    cfg: &'a SolverConfig,
    eta: f64,
    n: usize,
    tested: u64,
    screened: u64,
    examined: Vec<QuantizedVector>,
    gram: Option<Vec<f64>>,
    aty: Vec<f64>,
    yy: f64,
}

impl<'a> Search<'a> {
    fn new(a: &'a MeasurementEnsemble, y: &'a [f64], cfg: &'a SolverConfig, eta: f64) -> Self {
        Search {
            a,
            y,
            cfg,
            eta,
            n: a.cols(),
            tested: 0,
            screened: 0,
            examined: Vec::new(),
            gram: None,
            aty: Vec::new(),
            yy: y.iter().map(|v| v * v).sum(),
        }
    }

    fn charge(&mut self, units: u64) -> Result<()> {
        let used = self.tested + self.screened + units;
        if used > self.cfg.candidate_cap {
            return Err(McpError::Resource { needed: used as u128, cap: self.cfg.candidate_cap });
        }
        Ok(())
    }

    fn test(&mut self, v: &QuantizedVector) -> Result<bool> {
        self.charge(1)?;
        self.tested += 1;
        if self.cfg.record_examined {
            self.examined.push(v.clone());
        }
        Ok(self.a.residual(v, self.y)? <= self.eta)
    }

    fn finish(self, hit: Option<(QuantizedVector, CodecId, u64)>) -> RecoveryResult {
        let mut r = RecoveryResult {
            feasible: hit.is_some(),
            x_hat: Vec::new(),
            quantized: None,
            codec: None,
            dl_bits: None,
            residual: None,
            threshold: self.eta,
            l2_error: None,
            predicted_bound: None,
            within_bound: None,
            candidates_examined: self.tested,
            supports_screened: self.screened,
            examined: self.examined,
        };
        if let Some((v, codec, dl)) = hit {
            r.residual = Some(self.a.residual(&v, self.y).expect("dimensions checked"));
            r.x_hat = v.to_f64();
            r.quantized = Some(v);
            r.codec = Some(codec);
            r.dl_bits = Some(dl);
        }
        r
    }

    fn brute_group(&mut self, g: Group) -> Result<Option<QuantizedVector>> {
        let size = g.size(self.n, self.cfg.m);
        let left = self.cfg.candidate_cap - self.tested - self.screened;
        if size > left as u128 {
            return Err(McpError::Resource {
                needed: size + (self.tested + self.screened) as u128,
                cap: self.cfg.candidate_cap,
            });
        }
        for (v, _) in g.members(self.n, self.cfg.m) {
            if self.test(&v)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn sparse_group(&mut self, k: usize) -> Result<Option<QuantizedVector>> {
        let m = self.cfg.m;
        if k == 0 {
            let z = QuantizedVector::zeros(self.n, m)?;
            return Ok(if self.test(&z)? { Some(z) } else { None });
        }
        if self.aty.is_empty() {
            self.aty = self.a.apply_transpose(self.y)?;
        }
        if k >= 2 && self.gram.is_none() {
            self.gram = Some(self.a.gram());
        }
        let n = self.n;
        let eta2 = self.eta * self.eta;
        let tol = 1e-9 * (eta2 + self.yy) + 1e-12;
        let scale = (1u64 << m) as f64;
        let top = (1u64 << m) - 1;
        for support in Combinations::new(0, n, k) {
            self.charge(1)?;
            self.screened += 1;
            let g: Vec<f64> = match &self.gram {
                Some(gram) => {
                    let mut g = vec![0.0; k * k];
                    for (i, &p) in support.iter().enumerate() {
                        for (j, &q) in support.iter().enumerate() {
                            g[i * k + j] = gram[p * n + q];
                        }
                    }
                    g
                }
                None => {
                    let c = self.a.column(support[0]);
                    vec![c.iter().map(|v| v * v).sum()]
                }
            };
            let b: Vec<f64> = support.iter().map(|&p| self.aty[p]).collect();
            let Some(chol) = linalg::Cholesky::new(&g, k) else {
                if let Some(v) = self.box_search(&support)? {
                    return Ok(Some(v));
                }
                continue;
            };
            let center = chol.solve(&b);
            let fit: f64 = center.iter().zip(&b).map(|(c, b)| c * b).sum();
            let r2 = (self.yy - fit).max(0.0);
            let radius2 = eta2 - r2 + tol;
            if radius2 < 0.0 {
                continue;
            }
            let schur = linalg::leading_schur_complements(&chol.inverse(), k);
            let mut nums = vec![0u64; k];
            let mut w = vec![0.0; k];
            let mut found = None;
            self.lattice(&support, &center, &schur, radius2, scale, top, 0, &mut nums, &mut w, &mut found)?;
            if found.is_some() {
                return Ok(found);
            }
        }
        Ok(None)
    }

    /// Depth-first walk over the lattice points of the ellipsoid
    /// `(v - center)^T G (v - center) <= radius2`, coordinate 0 outermost.
    #[allow(clippy::too_many_arguments)]
    fn lattice(
        &mut self,
        support: &[usize],
        center: &[f64],
        schur: &[Vec<f64>],
        radius2: f64,
        scale: f64,
        top: u64,
        i: usize,
        nums: &mut [u64],
        w: &mut [f64],
        found: &mut Option<QuantizedVector>,
    ) -> Result<()> {
        let k = support.len();
        if i == k {
            let mut num = vec![0u64; self.n];
            for (&p, &v) in support.iter().zip(nums.iter()) {
                num[p] = v;
            }
            let v = QuantizedVector::from_numerators(num, self.cfg.m)?;
            if self.test(&v)? {
                *found = Some(v);
            }
            return Ok(());
        }
        let s = &schur[i];
        let dim = i + 1;
        let alpha = s[i * dim + i];
        let beta: f64 = (0..i).map(|j| s[i * dim + j] * w[j]).sum();
        let mut gamma = 0.0;
        for j in 0..i {
            for l in 0..i {
                gamma += s[j * dim + l] * w[j] * w[l];
            }
        }
        let disc = beta * beta - alpha * (gamma - radius2);
        if disc < 0.0 || alpha <= 0.0 {
            return Ok(());
        }
        let root = disc.sqrt();
        let lo_w = (-beta - root) / alpha;
        let hi_w = (-beta + root) / alpha;
        let pad = 1e-7;
        let lo = ((center[i] + lo_w) * scale - pad).ceil().max(1.0);
        let hi = ((center[i] + hi_w) * scale + pad).floor().min(top as f64);
        if lo > hi {
            return Ok(());
        }
        for num in lo as u64..=hi as u64 {
            nums[i] = num;
            w[i] = num as f64 / scale - center[i];
            self.lattice(support, center, schur, radius2, scale, top, i + 1, nums, w, found)?;
            if found.is_some() {
                return Ok(());
            }
        }
        Ok(())
    }

    /// Every nonzero value pattern on `support`, for supports whose Gram block
    /// is singular.
    fn box_search(&mut self, support: &[usize]) -> Result<Option<QuantizedVector>> {
        let top = (1u64 << self.cfg.m) - 1;
        let size = (top as u128).saturating_pow(support.len() as u32);
        let left = self.cfg.candidate_cap - self.tested - self.screened;
        if size > left as u128 {
            return Err(McpError::Resource {
                needed: size + (self.tested + self.screened) as u128,
                cap: self.cfg.candidate_cap,
            });
        }
        for vals in Odometer::new(support.len(), 1, top) {
            let mut num = vec![0u64; self.n];
            for (&p, &v) in support.iter().zip(&vals) {
                num[p] = v;
            }
            let v = QuantizedVector::from_numerators(num, self.cfg.m)?;
            if self.test(&v)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }
}
