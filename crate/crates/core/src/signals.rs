//! Signal generators for the four structured classes and their
//! low-complexity approximations.

use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codecs::piecewise::{coefficient_bits, PiecewisePoly};
use crate::error::{domain, McpError, Result};
use crate::quantize::truncate_bits;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SignalClassSpec {
    Sparse { k: usize },
    PiecewisePoly { q: usize, degree: usize },
    LpBall { p: f64 },
    Smooth { beta: u32, gamma: f64 },
}

impl SignalClassSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            SignalClassSpec::Sparse { k } if k > n => domain(format!("sparsity {k} exceeds n = {n}")),
            SignalClassSpec::PiecewisePoly { q, .. } if q >= n => {
                domain(format!("{q} breakpoints need more than {n} samples"))
            }
            SignalClassSpec::LpBall { p } if !(p > 0.0 && p <= 1.0) => domain(format!("p = {p} outside (0, 1]")),
            SignalClassSpec::Smooth { gamma, .. } if !(gamma > 0.0) => {
                domain(format!("gamma = {gamma} must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// A low-complexity approximation `x_tilde` with a guaranteed distance bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub x_tilde: Vec<f64>,
    /// Guaranteed upper bound on `||x - x_tilde||_2`.
    pub epsilon: f64,
    pub dl_class: SignalClassSpec,
}

/// `k` nonzero entries, iid uniform on `(0, 1)`, on a uniformly random support.
pub fn gen_sparse<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if k > n {
        return domain(format!("sparsity {k} exceeds n = {n}"));
    }
    let mut x = vec![0.0; n];
    for i in sample(rng, n, k).into_iter() {
        x[i] = loop {
            let v: f64 = rng.random();
            if v > 0.0 {
                break v;
            }
        };
    }
    Ok(x)
}

/// Samples of a random member of `Poly_N^Q` with grid-aligned breakpoints.
///
/// Coefficients are drawn on the `m'`-bit dyadic grid used by the
/// piecewise-polynomial codec at resolution `m`, so the codec reproduces
/// the truncated samples without coefficient loss.
pub fn gen_piecewise_poly<R: Rng + ?Sized>(
    n: usize,
    q: usize,
    degree: usize,
    m: u32,
    rng: &mut R,
) -> Result<(Vec<f64>, PiecewisePoly)> {
    if q >= n {
        return domain(format!("{q} breakpoints need more than {n} samples"));
    }
    let mut cuts: Vec<usize> = sample(rng, n - 1, q).into_iter().map(|i| i + 1).collect();
    cuts.sort_unstable();
    let mb = coefficient_bits(m, degree);
    let mut coefficients = Vec::with_capacity(q + 1);
    for _ in 0..=q {
        let raw: Vec<f64> = (0..=degree).map(|_| rng.random::<f64>()).collect();
        // total mass uniform on (0, 1)
        let mass: f64 = rng.random::<f64>();
        let total: f64 = raw.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let piece =
            raw.iter().map(|&a| truncate_bits(a / total * mass, mb).map(|d| d.value())).collect::<Result<Vec<_>>>()?;
        coefficients.push(piece);
    }
    let spec = PiecewisePoly { breakpoints: cuts.iter().map(|&c| c as f64 / n as f64).collect(), coefficients };
    Ok((spec.samples(n), spec))
}

/// Nonnegative vector with `sum x_i^p <= 1`: iid uniforms, rescaled onto the
/// ball when outside it.
pub fn gen_lp_ball<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(p > 0.0 && p <= 1.0) {
        return domain(format!("p = {p} outside (0, 1]"));
    }
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let s = lp_mass(&x, p);
    if s > 1.0 {
        let scale = s.powf(-1.0 / p);
        x.iter_mut().for_each(|v| *v *= scale);
        while lp_mass(&x, p) > 1.0 {
            x.iter_mut().for_each(|v| *v *= 1.0 - 1e-12);
        }
    }
    Ok(x)
}

/// `sum |x_i|^p`.
pub fn lp_mass(x: &[f64], p: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(p)).sum()
}

/// Integral-comparison constant `sqrt(p / (2 - p))` of the best k-term bound.
pub fn lp_tail_constant(p: f64) -> f64 {
    (p / (2.0 - p)).sqrt()
}

/// Keeps the `k` largest entries (ties to the lower index). For `||x||_p <= 1`
/// the discarded tail has l2 norm at most `c_p k^(1/2 - 1/p)`.
pub fn top_k_approx(x: &[f64], k: usize, p: f64) -> Result<ApproxResult> {
    if k > x.len() {
        return domain(format!("k = {k} exceeds n = {}", x.len()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return domain(format!("p = {p} outside (0, 1]"));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut x_tilde = vec![0.0; x.len()];
    for &i in &order[..k] {
        x_tilde[i] = x[i];
    }
    let epsilon = if k == 0 { f64::INFINITY } else { lp_tail_constant(p) * (k as f64).powf(0.5 - 1.0 / p) };
    Ok(ApproxResult { x_tilde, epsilon, dl_class: SignalClassSpec::Sparse { k } })
}

/// A function on `[0, 1]` with known derivatives and a certified bound
/// `gamma >= sup |f^(beta+1)|`.
pub trait SmoothFn {
    /// `order`-th derivative at `t`.
    fn derivative(&self, order: u32, t: f64) -> f64;

    fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    fn derivative_bound(&self, order: u32) -> f64;

    fn samples(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.value(j as f64 / n as f64)).collect()
    }
}

/// `(1 - cos(2 pi w t)) / 2`.
#[derive(Debug, Clone, Copy)]
pub struct RaisedCosine {
    pub frequency: f64,
}

impl SmoothFn for RaisedCosine {
    fn derivative(&self, order: u32, t: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * self.frequency;
        if order == 0 {
            return (1.0 - (w * t).cos()) / 2.0;
        }
        // d^k/dt^k cos(wt) = w^k cos(wt + k pi/2)
        -w.powi(order as i32) * (w * t + order as f64 * std::f64::consts::FRAC_PI_2).cos() / 2.0
    }

    fn derivative_bound(&self, order: u32) -> f64 {
        if order == 0 {
            1.0
        } else {
            (2.0 * std::f64::consts::PI * self.frequency).powi(order as i32) / 2.0
        }
    }
}

/// `sum_i c_i t^i` with nonnegative coefficients summing below one.
#[derive(Debug, Clone)]
pub struct Polynomial {
    pub coefficients: Vec<f64>,
}

impl SmoothFn for Polynomial {
    fn derivative(&self, order: u32, t: f64) -> f64 {
        let k = order as usize;
        self.coefficients.iter().enumerate().skip(k).map(|(i, &c)| c * falling(i, k) * t.powi((i - k) as i32)).sum()
    }

    fn derivative_bound(&self, order: u32) -> f64 {
        let k = order as usize;
        self.coefficients.iter().enumerate().skip(k).map(|(i, &c)| c.abs() * falling(i, k)).sum()
    }
}

fn falling(i: usize, k: usize) -> f64 {
    (0..k).map(|j| (i - j) as f64).product()
}

/// `a exp(b t)`.
#[derive(Debug, Clone, Copy)]
pub struct Exponential {
    pub scale: f64,
    pub rate: f64,
}

impl SmoothFn for Exponential {
    fn derivative(&self, order: u32, t: f64) -> f64 {
        self.scale * self.rate.powi(order as i32) * (self.rate * t).exp()
    }

    fn derivative_bound(&self, order: u32) -> f64 {
        (self.scale * self.rate.powi(order as i32)).abs() * self.rate.max(0.0).exp()
    }
}

/// Degree-`beta` Taylor expansion at the left end of each width-`r`
/// subinterval, sampled on the grid `j/n`.
///
/// The remainder is at most `gamma r^(beta+1) / (beta+1)!`, so
/// `epsilon = gamma sqrt(n) r^(beta+1)` bounds the sampled l2 error.
pub fn piecewise_poly_fit<F: SmoothFn + ?Sized>(f: &F, n: usize, r: f64, beta: u32) -> Result<ApproxResult> {
    if !(r > 0.0 && r <= 1.0) {
        return domain(format!("interval width {r} outside (0, 1]"));
    }
    if n == 0 {
        return domain("n must be positive");
    }
    let gamma = f.derivative_bound(beta + 1);
    let pieces = (1.0 / r).ceil() as usize;
    let x_tilde = (0..n)
        .map(|j| {
            let t = j as f64 / n as f64;
            let piece = ((t / r).floor() as usize).min(pieces - 1);
            let c = piece as f64 * r;
            let h = t - c;
            let mut term = 1.0;
            let mut acc = 0.0;
            for i in 0..=beta {
                if i > 0 {
                    term *= h / i as f64;
                }
                acc += f.derivative(i, c) * term;
            }
            acc
        })
        .collect();
    Ok(ApproxResult {
        x_tilde,
        epsilon: gamma * (n as f64).sqrt() * r.powi(beta as i32 + 1),
        dl_class: SignalClassSpec::PiecewisePoly { q: pieces - 1, degree: beta as usize },
    })
}

/// One value per line, shortest round-trip decimal.
pub fn write_signal_csv<W: Write>(mut out: W, x: &[f64]) -> Result<()> {
    for v in x {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

pub fn read_signal_csv<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse::<f64>().map_err(|e| McpError::Config(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
