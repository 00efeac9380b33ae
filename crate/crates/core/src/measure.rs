//! Gaussian measurement ensembles and Monte-Carlo checks of the two
//! concentration events used by the recovery guarantee.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, McpError, Result};
use crate::quantize::QuantizedVector;

/// Default null-space margin `tau`.
pub const DEFAULT_TAU: f64 = 0.04;
/// Relative residual tolerance of the power iteration.
pub const SIGMA_TOL: f64 = 1e-8;

const FILE_MAGIC: &[u8; 4] = b"MCPE";
const FILE_VERSION: u8 = 1;

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// A `d x n` matrix with iid `N(0, 1/d)` entries, regenerated from its seed.
///
/// Entries are drawn column by column from a ChaCha8 stream keyed by the
/// seed, and stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    d: usize,
    n: usize,
    seed: u64,
    columns: Vec<f64>,
    sigma_max: f64,
}

pub fn sample_ensemble(d: usize, n: usize, seed: u64) -> Result<MeasurementEnsemble> {
    if d == 0 || n == 0 {
        return domain(format!("ensemble dimensions must be positive, got {d} x {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (d as f64).sqrt();
    let columns: Vec<f64> = (0..d * n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect();
    let mut ens = MeasurementEnsemble { d, n, seed, columns, sigma_max: 0.0 };
    ens.sigma_max = ens.compute_sigma_max();
    Ok(ens)
}

impl MeasurementEnsemble {
    pub fn rows(&self) -> usize {
        self.d
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.d..(j + 1) * self.d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j * self.d + i]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(McpError::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let mut y = vec![0.0; self.d];
        for (j, &v) in x.iter().enumerate() {
            if v != 0.0 {
                axpy(&mut y, v, self.column(j));
            }
        }
        Ok(y)
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.d {
            return Err(McpError::DimensionMismatch { expected: self.d, got: y.len() });
        }
        Ok((0..self.n).map(|j| dot(self.column(j), y)).collect())
    }

    /// `A` applied to a dequantized vector, touching only its support.
    pub fn apply_quantized(&self, x: &QuantizedVector) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(McpError::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let scale = (1u64 << x.bits()) as f64;
        let mut y = vec![0.0; self.d];
        for j in x.support() {
            axpy(&mut y, x.numerators()[j] as f64 / scale, self.column(j));
        }
        Ok(y)
    }

    /// `||A x - y||_2` for a quantized candidate.
    pub fn residual(&self, x: &QuantizedVector, y: &[f64]) -> Result<f64> {
        if y.len() != self.d {
            return Err(McpError::DimensionMismatch { expected: self.d, got: y.len() });
        }
        let ax = self.apply_quantized(x)?;
        Ok(ax.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    }

    /// Gram matrix of the smaller side: `A A^T` if `d <= n`, else `A^T A`.
    fn small_gram(&self) -> (usize, Vec<f64>) {
        if self.d <= self.n {
            let d = self.d;
            let mut g = vec![0.0; d * d];
            for j in 0..self.n {
                let c = self.column(j);
                for a in 0..d {
                    let ca = c[a];
                    for b in a..d {
                        g[a * d + b] += ca * c[b];
                    }
                }
            }
            symmetrize(&mut g, d);
            (d, g)
        } else {
            let n = self.n;
            let mut g = vec![0.0; n * n];
            for a in 0..n {
                for b in a..n {
                    g[a * n + b] = dot(self.column(a), self.column(b));
                }
            }
            symmetrize(&mut g, n);
            (n, g)
        }
    }

    /// Largest singular value by power iteration on the smaller Gram matrix,
    /// stopped when `||G v - lambda v|| <= SIGMA_TOL * lambda`.
    fn compute_sigma_max(&self) -> f64 {
        let (k, g) = self.small_gram();
        let mut v: Vec<f64> = (0..k).map(|i| 1.0 + 0.01 * ((i * 7919) % 101) as f64).collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let w = symv(&g, k, &v);
            lambda = dot(&v, &w);
            let res: f64 = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            v = w;
            let norm = normalize(&mut v);
            if norm == 0.0 || res <= SIGMA_TOL * lambda {
                break;
            }
        }
        lambda.max(0.0).sqrt()
    }

    pub fn gram(&self) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                g[a * n + b] = dot(self.column(a), self.column(b));
            }
        }
        symmetrize(&mut g, n);
        g
    }

    /// Writes the header-only file form: magic, version, `d`, `n`, seed.
    pub fn write_header<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(FILE_MAGIC)?;
        out.write_all(&[FILE_VERSION])?;
        out.write_all(&(self.d as u64).to_le_bytes())?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        Ok(())
    }

    /// Regenerates an ensemble from its header.
    pub fn read_header<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = [0u8; 29];
        input.read_exact(&mut buf).map_err(|e| McpError::Decode(format!("ensemble header: {e}")))?;
        if &buf[..4] != FILE_MAGIC || buf[4] != FILE_VERSION {
            return Err(McpError::Decode("not an ensemble file".into()));
        }
        let word = |i: usize| u64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
        sample_ensemble(word(5) as usize, word(13) as usize, word(21))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn symmetrize(g: &mut [f64], k: usize) {
    for a in 0..k {
        for b in 0..a {
            g[a * k + b] = g[b * k + a];
        }
    }
}

fn symv(g: &[f64], k: usize, v: &[f64]) -> Vec<f64> {
    (0..k).map(|a| dot(&g[a * k..(a + 1) * k], v)).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// `P(sum Z_i^2 - 1 < -tau) <= exp((d/2)(tau + ln(1 - tau)))` for
/// `Z_i ~ N(0, 1/d)`.
pub fn chi_square_lower_tail_bound(d: usize, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return domain(format!("tau = {tau} outside (0, 1)"));
    }
    if d == 0 {
        return domain("d must be positive");
    }
    Ok((d as f64 / 2.0 * (tau + (-tau).ln_1p())).exp())
}

/// `P(sigma_max(A) - 1 - sqrt(n/d) > t) <= exp(-d t^2 / 2)`.
pub fn sigma_max_tail_bound(d: usize, t: f64) -> f64 {
    (-(d as f64) * t * t / 2.0).exp()
}

/// Probability that one fixed nonzero vector violates `||A y|| >= tau ||y||`.
pub fn injectivity_failure_bound(d: usize, tau: f64) -> f64 {
    (d as f64 / 2.0 * (1.0 - tau * tau + 2.0 * tau.ln())).exp().min(1.0)
}

/// Union bound over at most `2^(budget+1)` codebook differences.
pub fn e1_union_bound(budget_bits: u64, d: usize, tau: f64) -> f64 {
    ((budget_bits as f64 + 1.0) * std::f64::consts::LN_2 + d as f64 / 2.0 * (1.0 - tau * tau + 2.0 * tau.ln()))
        .exp()
        .min(1.0)
}

/// `3 sqrt(p (1 - p) / trials)`.
pub fn three_sigma(p: f64, trials: u64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Outcome of a Monte-Carlo tail check against an analytic bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub trials: u64,
    pub hits: u64,
    pub empirical: f64,
    pub bound: f64,
    pub pass: bool,
}

impl TailCheck {
    fn new(trials: u64, hits: u64, bound: f64) -> Self {
        let empirical = hits as f64 / trials as f64;
        TailCheck { trials, hits, empirical, bound, pass: empirical <= bound + three_sigma(bound, trials) }
    }
}

/// Frequency of `||A x||^2 < 1 - tau` for `x = e_1` in `R^4`.
pub fn mc_check_chi_lemma(d: usize, tau: f64, trials: u64, seed: u64) -> Result<TailCheck> {
    mc_check_chi_lemma_with(d, tau, trials, seed, &[1.0, 0.0, 0.0, 0.0])
}

/// Frequency of `||A x||^2 < 1 - tau` for a fixed unit vector `x`, with a
/// fresh ensemble per trial.
pub fn mc_check_chi_lemma_with(d: usize, tau: f64, trials: u64, seed: u64, unit: &[f64]) -> Result<TailCheck> {
    let bound = chi_square_lower_tail_bound(d, tau)?;
    if trials == 0 {
        return domain("trials must be positive");
    }
    let norm = dot(unit, unit).sqrt();
    if unit.is_empty() || (norm - 1.0).abs() > 1e-12 {
        return domain("probe vector must have unit norm");
    }
    let n = unit.len();
    let scale = 1.0 / (d as f64).sqrt();
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, trial));
            let mut sq = 0.0;
            for _ in 0..d {
                let mut row = 0.0;
                for &u in unit.iter().take(n) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    row += z * scale * u;
                }
                sq += row * row;
            }
            (sq < 1.0 - tau) as u64
        })
        .sum();
    Ok(TailCheck::new(trials, hits, bound))
}

/// Frequency of `sigma_max(A) - 1 - sqrt(n/d) > t` over fresh ensembles.
pub fn sigma_max_tail_check(d: usize, n: usize, t: f64, trials: u64, seed: u64) -> Result<TailCheck> {
    if !(t > 0.0) {
        return domain(format!("t = {t} must be positive"));
    }
    if trials == 0 {
        return domain("trials must be positive");
    }
    let edge = 1.0 + (n as f64 / d as f64).sqrt() + t;
    let hits = (0..trials)
        .into_par_iter()
        .map(|trial| sample_ensemble(d, n, derive_seed(seed, trial)).map(|a| (a.sigma_max() > edge) as u64))
        .sum::<Result<u64>>()?;
    Ok(TailCheck::new(trials, hits, sigma_max_tail_bound(d, t)))
}

/// For each candidate, whether `||A y|| >= tau ||y||`.
pub fn null_space_injectivity_check(
    a: &MeasurementEnsemble,
    candidates: &[QuantizedVector],
    tau: f64,
) -> Result<Vec<bool>> {
    candidates
        .iter()
        .map(|y| {
            if y.is_zero() {
                return domain("injectivity check needs nonzero candidates");
            }
            let v = y.to_f64();
            injective_on(a, &v, tau)
        })
        .collect()
}

/// `||A v|| >= tau ||v||` for a real vector.
pub fn injective_on(a: &MeasurementEnsemble, v: &[f64], tau: f64) -> Result<bool> {
    let av = a.apply(v)?;
    Ok(dot(&av, &av).sqrt() >= tau * dot(v, v).sqrt())
}

/// Whether `sigma_max <= 1 + sqrt(n/d) + t`.
pub fn e2_holds(a: &MeasurementEnsemble, t: f64) -> bool {
    a.sigma_max() <= 1.0 + (a.cols() as f64 / a.rows() as f64).sqrt() + t
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn svd_sigma(a: &MeasurementEnsemble) -> f64 {
        let m = DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j));
        m.singular_values().max()
    }

    #[test]
    fn deterministic_and_dimension_checked() {
        let a = sample_ensemble(5, 9, 42).unwrap();
        let b = sample_ensemble(5, 9, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_ensemble(5, 9, 43).unwrap());
        assert!(sample_ensemble(0, 3, 1).is_err());
        assert!(sample_ensemble(3, 0, 1).is_err());
        assert!(a.apply(&[0.0; 8]).is_err());
    }

    #[test]
    fn entry_variance_is_one_over_d() {
        let a = sample_ensemble(4, 250_000, 11).unwrap();
        let (mut s, mut s2) = (0.0, 0.0);
        for j in 0..a.cols() {
            for &v in a.column(j) {
                s += v;
                s2 += v * v;
            }
        }
        let cnt = 1_000_000.0;
        let var = s2 / cnt - (s / cnt).powi(2);
        assert!((var - 0.25).abs() / 0.25 < 0.02, "variance {var}");
    }

    #[test]
    fn unit_column_energy_expectation() {
        let mut total = 0.0;
        let trials = 4000;
        for t in 0..trials {
            let a = sample_ensemble(20, 1, t).unwrap();
            total += dot(a.column(0), a.column(0));
        }
        assert!((total / trials as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn power_iteration_matches_svd() {
        for (d, n, seed) in [(10, 10, 1), (40, 256, 2), (7, 3, 3), (1, 5, 4), (30, 31, 5)] {
            let a = sample_ensemble(d, n, seed).unwrap();
            let s = svd_sigma(&a);
            assert!((a.sigma_max() - s).abs() <= 1e-7 * s, "{d}x{n}: {} vs {s}", a.sigma_max());
        }
    }

    #[test]
    fn header_file_regenerates() {
        let a = sample_ensemble(6, 11, 99).unwrap();
        let mut buf = Vec::new();
        a.write_header(&mut buf).unwrap();
        assert_eq!(buf.len(), 29);
        assert_eq!(MeasurementEnsemble::read_header(&buf[..]).unwrap(), a);
        buf[0] = b'X';
        assert!(MeasurementEnsemble::read_header(&buf[..]).is_err());
    }

    #[test]
    fn chi_bound_values() {
        assert!((chi_square_lower_tail_bound(7, 1e-9).unwrap() - 1.0).abs() < 1e-12);
        let b = chi_square_lower_tail_bound(1, 0.5).unwrap();
        assert!((b - 0.907_943).abs() < 1e-5);
        // P(Z^2 < 0.5) for standard normal Z
        let normal = Normal::new(0.0, 1.0).unwrap();
        let truth = 2.0 * normal.cdf(0.5f64.sqrt()) - 1.0;
        assert!((truth - 0.5205).abs() < 1e-4 && truth <= b);
        let b100 = chi_square_lower_tail_bound(100, 0.5).unwrap();
        assert!((b100.ln() - 50.0 * (0.5 + 0.5f64.ln())).abs() < 1e-12);
        assert!((b100 - 6.40e-5).abs() < 0.01e-5);
        assert!(chi_square_lower_tail_bound(5, 0.0).is_err());
        assert!(chi_square_lower_tail_bound(5, 1.0).is_err());
    }

    #[test]
    fn chi_check_examples() {
        let c = mc_check_chi_lemma(50, 0.9, 20_000, 1).unwrap();
        assert_eq!(c.hits, 0);
        assert!(c.pass);
        let c = mc_check_chi_lemma(100, 0.5, 20_000, 2).unwrap();
        assert_eq!(c.bound, chi_square_lower_tail_bound(100, 0.5).unwrap());
        assert!(c.pass);
        let again = mc_check_chi_lemma(100, 0.5, 20_000, 2).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn chi_check_is_rotation_invariant() {
        let s = 0.5f64.sqrt();
        let probes: [&[f64]; 3] = [&[1.0, 0.0, 0.0, 0.0], &[s, -s, 0.0, 0.0], &[0.5, 0.5, 0.5, -0.5]];
        let freqs: Vec<f64> =
            probes.iter().map(|u| mc_check_chi_lemma_with(10, 0.3, 40_000, 5, u).unwrap().empirical).collect();
        let p = freqs[0];
        let tol = 2.0 * three_sigma(p, 40_000);
        assert!(p > 0.05);
        for f in &freqs {
            assert!((f - p).abs() <= tol, "{freqs:?}");
        }
        assert!(mc_check_chi_lemma_with(10, 0.3, 10, 5, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn sigma_tail_examples() {
        assert!((sigma_max_tail_bound(40, 1.0) - 2.061e-9).abs() < 1e-12);
        assert!((sigma_max_tail_bound(10, 0.5) - 0.286_504_8).abs() < 1e-6);
        assert!(sigma_max_tail_bound(10, 50.0) < 1e-300);
        let c = sigma_max_tail_check(10, 10, 0.5, 2000, 3).unwrap();
        assert!(c.empirical < c.bound && c.pass);
        assert!(sigma_max_tail_check(10, 10, 0.0, 10, 3).is_err());
    }

    #[test]
    fn injectivity_on_tall_matrix() {
        let a = sample_ensemble(40, 8, 17).unwrap();
        let cands: Vec<QuantizedVector> = (1..200u64)
            .map(|i| QuantizedVector::from_numerators((0..8).map(|j| (i * (j + 3)) % 16).collect(), 4).unwrap())
            .filter(|q| !q.is_zero())
            .collect();
        let res = null_space_injectivity_check(&a, &cands, 0.1).unwrap();
        assert!(res.iter().all(|&ok| ok));
        assert!(null_space_injectivity_check(&a, &[QuantizedVector::zeros(8, 4).unwrap()], 0.1).is_err());
    }

    #[test]
    fn two_routes_for_difference_norm() {
        let a = sample_ensemble(12, 30, 8).unwrap();
        let x = QuantizedVector::from_numerators((0..30).map(|i| (i * 37) % 256).collect(), 8).unwrap();
        let y = QuantizedVector::from_numerators((0..30).map(|i| (i * 91 + 5) % 256).collect(), 8).unwrap();
        let diff: Vec<f64> = x.to_f64().iter().zip(y.to_f64()).map(|(a, b)| a - b).collect();
        let direct = a.apply(&diff).unwrap();
        let ax = a.apply_quantized(&x).unwrap();
        let ay = a.apply_quantized(&y).unwrap();
        let n1 = dot(&direct, &direct).sqrt();
        let n2: f64 = ax.iter().zip(&ay).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!((n1 - n2).abs() <= 1e-10 * dot(&diff, &diff).sqrt());
    }

    #[test]
    fn seed_derivation_spreads() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
