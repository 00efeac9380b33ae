//! Monte-Carlo experiment runners.
//!
//! Trial `i` of a run with master seed `s` uses the seed
//! `derive_seed(derive_seed(s, cell), i)` where `cell` indexes `n` in the
//! grid. The signal is drawn from `derive_seed(trial_seed, 0)` and the
//! ensemble for the `j`-th measurement count from
//! `derive_seed(trial_seed, 1 + j)`, so every `d` sees the same signal.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, WidthRule};
use super::output::Criterion;
use crate::codecs::piecewise::pp_dl_bound;
use crate::codecs::sparse::sparse_dl_bound;
use crate::codecs::DlBudget;
use crate::error::{McpError, Result};
use crate::measure::{
    derive_seed, e2_holds, injective_on, mc_check_chi_lemma, sample_ensemble, sigma_max_tail_check, three_sigma,
    MeasurementEnsemble,
};
use crate::quantize::{quantize_vector, QuantizedVector};
use crate::signals::{
    gen_lp_ball, gen_piecewise_poly, gen_sparse, l2_distance, piecewise_poly_fit, top_k_approx, RaisedCosine,
    SignalClassSpec,
};
use crate::solver::{
    corollary_error_bound, mcp_exact, mcp_tolerant, mismatch_error_bound, predicted_error_bound, RecoveryResult,
    SolverConfig,
};

/// Records, an aggregate summary, and the criteria checked on them.
#[derive(Debug, Clone)]
pub struct Report<R, S> {
    pub records: Vec<R>,
    pub summary: S,
    pub criteria: Vec<Criterion>,
}

impl<R, S> Report<R, S> {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    Infeasible,
    /// The candidate cap was reached before the search finished.
    Resource,
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w);
    }
    b.build().map_err(|e| McpError::Config(format!("thread pool: {e}")))
}

fn trial_seed(master: u64, cell: usize, trial: u64) -> u64 {
    derive_seed(derive_seed(master, cell as u64), trial)
}

fn elapsed_ms(start: Instant, on: bool) -> Option<f64> {
    on.then(|| start.elapsed().as_secs_f64() * 1e3)
}

/// Solver result, or the resource outcome when the cap was hit.
fn solve(run: impl FnOnce() -> Result<RecoveryResult>) -> Result<Option<RecoveryResult>> {
    match run() {
        Ok(r) => Ok(Some(r)),
        Err(McpError::Resource { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn status(r: &Option<RecoveryResult>) -> Status {
    match r {
        None => Status::Resource,
        Some(r) if r.feasible => Status::Solved,
        Some(_) => Status::Infeasible,
    }
}

/// Normalized complexity of the class: the configured value, else the
/// codec's length bound over `m`.
fn kappa_for(cfg: &ExperimentConfig, spec: &SignalClassSpec, n: usize, m: u32) -> Result<f64> {
    if let Some(k) = cfg.kappa {
        return Ok(k);
    }
    let bits = match *spec {
        SignalClassSpec::Sparse { k } => sparse_dl_bound(k, n, m)?,
        SignalClassSpec::PiecewisePoly { q, degree } => pp_dl_bound(q, degree, n, m)?,
        other => return Err(McpError::Config(format!("no codec length bound for {other:?}"))),
    };
    Ok(bits / m as f64)
}

/// Whether `||A (z - x_q)|| >= tau ||z - x_q||` for every examined `z != x_q`.
fn e1_holds(a: &MeasurementEnsemble, truth: &QuantizedVector, examined: &[QuantizedVector], tau: f64) -> Result<bool> {
    let base = truth.to_f64();
    for z in examined {
        if z == truth {
            continue;
        }
        let diff: Vec<f64> = z.to_f64().iter().zip(&base).map(|(a, b)| a - b).collect();
        if !injective_on(a, &diff, tau)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn exact_signal<R: Rng>(spec: &SignalClassSpec, n: usize, m: u32, rng: &mut R) -> Result<Vec<f64>> {
    match *spec {
        SignalClassSpec::Sparse { k } => gen_sparse(n, k, rng),
        SignalClassSpec::PiecewisePoly { q, degree } => Ok(gen_piecewise_poly(n, q, degree, m, rng)?.0),
        other => Err(McpError::Config(format!("{other:?} is not an exactly structured class; use the mismatch scan"))),
    }
}

fn support_bound(spec: &SignalClassSpec, n: usize) -> usize {
    match *spec {
        SignalClassSpec::Sparse { k } => k,
        _ => n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub class: String,
    pub n: usize,
    pub m: u32,
    pub d: usize,
    pub d_index: usize,
    pub trial: u64,
    pub seed: u64,
    pub budget: u64,
    pub status: Status,
    pub success: bool,
    /// Recovered quantized signal equals the truth's.
    pub exact: bool,
    /// Recovered support equals the truth's.
    pub support_match: bool,
    pub l2_error: Option<f64>,
    pub predicted_bound: f64,
    pub dl_bits: Option<u64>,
    pub residual: Option<f64>,
    pub threshold: Option<f64>,
    pub sigma_max: f64,
    pub e1: Option<bool>,
    pub e2: bool,
    pub candidates_examined: Option<u64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanCell {
    pub n: usize,
    pub d: usize,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub exact_rate: f64,
    pub support_rate: f64,
    pub unsolved: u64,
    pub conditional_trials: u64,
    pub conditional_violations: u64,
}

/// Success frequency over the `d` grid for exactly structured classes.
pub fn run_phase_scan(cfg: &ExperimentConfig) -> Result<Report<ScanRecord, Vec<ScanCell>>> {
    cfg.validate()?;
    if cfg.d.is_empty() {
        return Err(McpError::Config("d grid is empty".into()));
    }
    let mut jobs = Vec::new();
    for (ni, &n) in cfg.n.iter().enumerate() {
        for (di, &d) in cfg.d.iter().enumerate() {
            for trial in 0..cfg.trials {
                jobs.push((ni, n, di, d, trial));
            }
        }
    }
    let mut records: Vec<ScanRecord> = pool(cfg.workers)?.install(|| {
        jobs.par_iter().map(|&(ni, n, di, d, trial)| scan_trial(cfg, ni, n, di, d, trial)).collect::<Result<_>>()
    })?;
    records.sort_by_key(|r| (r.n, r.d_index, r.trial));

    let mut cells = Vec::new();
    for &n in &cfg.n {
        for &d in &cfg.d {
            let rows: Vec<&ScanRecord> = records.iter().filter(|r| r.n == n && r.d == d).collect();
            let t = rows.len() as u64;
            let successes = rows.iter().filter(|r| r.success).count() as u64;
            let conditional: Vec<&&ScanRecord> = rows.iter().filter(|r| r.e1 == Some(true) && r.e2).collect();
            cells.push(ScanCell {
                n,
                d,
                trials: t,
                successes,
                success_rate: successes as f64 / t as f64,
                exact_rate: rows.iter().filter(|r| r.exact).count() as f64 / t as f64,
                support_rate: rows.iter().filter(|r| r.support_match).count() as f64 / t as f64,
                unsolved: rows.iter().filter(|r| r.status != Status::Solved).count() as u64,
                conditional_trials: conditional.len() as u64,
                conditional_violations: conditional.iter().filter(|r| !r.success).count() as u64,
            });
        }
    }
    let criteria = scan_criteria(cfg, &cells);
    Ok(Report { records, summary: cells, criteria })
}

fn scan_trial(cfg: &ExperimentConfig, ni: usize, n: usize, di: usize, d: usize, trial: u64) -> Result<ScanRecord> {
    let start = Instant::now();
    let spec = cfg.class_spec(n)?;
    let m = cfg.bits_for(n);
    let seed = trial_seed(cfg.seed, ni, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let x = exact_signal(&spec, n, m, &mut rng)?;
    let x_q = quantize_vector(&x, m)?;
    let a = sample_ensemble(d, n, derive_seed(seed, 1 + di as u64))?;
    let y = a.apply(&x)?;
    let kappa = kappa_for(cfg, &spec, n, m)?;
    let budget = DlBudget::for_difference(kappa, cfg.delta, m)?;
    let mut solver = SolverConfig::new(&[spec], m, budget).with_literal(cfg.include_literal);
    solver.candidate_cap = cfg.candidate_cap;
    solver.record_examined = cfg.check_events;
    let eta = cfg.slack_for(&spec, support_bound(&spec, n)).eta(a.sigma_max(), n, m);
    let bound = predicted_error_bound(n, d, m, cfg.tau, cfg.t)?;
    let mut result = solve(|| mcp_exact(&a, &y, &solver, eta))?;
    if let Some(r) = result.as_mut() {
        r.evaluate(&x, bound)?;
    }
    let e1 = match (&result, cfg.check_events) {
        (Some(r), true) => Some(e1_holds(&a, &x_q, &r.examined, cfg.tau)?),
        _ => None,
    };
    Ok(ScanRecord {
        class: cfg.class.clone(),
        n,
        m,
        d,
        d_index: di,
        trial,
        seed,
        budget: budget.bits(),
        status: status(&result),
        success: result.as_ref().is_some_and(|r| r.within_bound == Some(true)),
        exact: result.as_ref().is_some_and(|r| r.quantized.as_ref() == Some(&x_q)),
        support_match: result
            .as_ref()
            .and_then(|r| r.quantized.as_ref())
            .is_some_and(|v| v.support().eq(x_q.support())),
        l2_error: result.as_ref().and_then(|r| r.l2_error),
        predicted_bound: bound,
        dl_bits: result.as_ref().and_then(|r| r.dl_bits),
        residual: result.as_ref().and_then(|r| r.residual),
        threshold: result.as_ref().map(|r| r.threshold),
        sigma_max: a.sigma_max(),
        e1,
        e2: e2_holds(&a, cfg.t),
        candidates_examined: result.as_ref().map(|r| r.candidates_examined),
        wall_ms: elapsed_ms(start, cfg.timing),
    })
}

/// Two-sample 3-sigma allowance for a drop between frequencies.
fn trend_slack(p1: f64, p2: f64, t1: u64, t2: u64) -> f64 {
    let p = (p1 * t1 as f64 + p2 * t2 as f64) / (t1 + t2) as f64;
    3.0 * (p * (1.0 - p) * (1.0 / t1 as f64 + 1.0 / t2 as f64)).sqrt()
}

fn scan_criteria(cfg: &ExperimentConfig, cells: &[ScanCell]) -> Vec<Criterion> {
    let mut out = Vec::new();
    for &n in &cfg.n {
        let mut row: Vec<&ScanCell> = cells.iter().filter(|c| c.n == n).collect();
        row.sort_by_key(|c| c.d);
        let drops: Vec<String> = row
            .windows(2)
            .filter(|w| {
                w[1].success_rate + trend_slack(w[0].success_rate, w[1].success_rate, w[0].trials, w[1].trials)
                    < w[0].success_rate
            })
            .map(|w| format!("d={}→{}: {:.3}→{:.3}", w[0].d, w[1].d, w[0].success_rate, w[1].success_rate))
            .collect();
        out.push(Criterion::new(
            format!("n={n}: success nondecreasing in d"),
            drops.is_empty(),
            if drops.is_empty() { "isotonic within 3 sigma".into() } else { drops.join("; ") },
        ));
        if cfg.check_events {
            let trials: u64 = row.iter().map(|c| c.conditional_trials).sum();
            let bad: u64 = row.iter().map(|c| c.conditional_violations).sum();
            out.push(Criterion::new(
                format!("n={n}: error bound on E1 and E2"),
                bad == 0,
                format!("{bad} violations over {trials} conditional trials"),
            ));
        }
        let (Some(lo), Some(hi)) = (row.first(), row.last()) else { continue };
        if let Some(min) = cfg.min_success {
            out.push(Criterion::new(
                format!("n={n}, d={}: success >= {min}", hi.d),
                hi.success_rate >= min,
                format!("success rate {:.4} over {} trials", hi.success_rate, hi.trials),
            ));
        }
        if let Some(gap) = cfg.min_drop {
            let drop = hi.success_rate - lo.success_rate;
            out.push(Criterion::new(
                format!("n={n}: success at d={} exceeds d={} by >= {gap}", hi.d, lo.d),
                drop >= gap,
                format!(
                    "{:.4} vs {:.4} (support recovery {:.4} vs {:.4})",
                    hi.success_rate, lo.success_rate, hi.support_rate, lo.support_rate
                ),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryRecord {
    pub n: usize,
    pub m: u32,
    pub d: usize,
    pub kappa: f64,
    pub trial: u64,
    pub seed: u64,
    pub status: Status,
    pub failure: bool,
    pub l2_error: Option<f64>,
    pub error_bound: f64,
    pub dl_bits: Option<u64>,
    pub residual: Option<f64>,
    pub sigma_max: f64,
    pub e2: bool,
    pub candidates_examined: Option<u64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollarySummary {
    pub n: usize,
    pub m: u32,
    pub d: usize,
    pub kappa: f64,
    pub error_bound: f64,
    pub trials: u64,
    pub failures: u64,
    pub failure_rate: f64,
    pub failure_probability: f64,
    pub allowed: f64,
}

/// Finite-`n` check of the sparse-class error bound at
/// `m = ceil(alpha log2 n)` and `d = ceil(2 alpha kappa log2 n)`.
pub fn run_corollary_check(cfg: &ExperimentConfig) -> Result<Report<CorollaryRecord, Vec<CorollarySummary>>> {
    cfg.validate()?;
    if cfg.class != "sparse" {
        return Err(McpError::Config("the corollary check needs the sparse class".into()));
    }
    let mut plans = Vec::new();
    for &n in &cfg.n {
        let m = cfg.bits_for(n);
        let spec = cfg.class_spec(n)?;
        let kappa = kappa_for(cfg, &spec, n, m)?;
        let d = (2.0 * cfg.alpha * kappa * (n as f64).log2()).ceil() as usize;
        let bound = corollary_error_bound(n, cfg.alpha, kappa)?;
        plans.push((n, m, spec, kappa, d, bound));
    }
    let jobs: Vec<(usize, u64)> = (0..plans.len()).flat_map(|i| (0..cfg.trials).map(move |t| (i, t))).collect();
    let mut records: Vec<CorollaryRecord> = pool(cfg.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(i, trial)| {
                let start = Instant::now();
                let (n, m, spec, kappa, d, bound) = plans[i];
                let seed = trial_seed(cfg.seed, i, trial);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
                let x = exact_signal(&spec, n, m, &mut rng)?;
                let a = sample_ensemble(d, n, derive_seed(seed, 1))?;
                let y = a.apply(&x)?;
                let budget = DlBudget::for_difference(kappa, cfg.delta, m)?;
                let mut solver = SolverConfig::new(&[spec], m, budget);
                solver.candidate_cap = cfg.candidate_cap;
                let eta = cfg.slack_for(&spec, support_bound(&spec, n)).eta(a.sigma_max(), n, m);
                let mut result = solve(|| mcp_exact(&a, &y, &solver, eta))?;
                if let Some(r) = result.as_mut() {
                    r.evaluate(&x, bound.error_bound)?;
                }
                Ok(CorollaryRecord {
                    n,
                    m,
                    d,
                    kappa,
                    trial,
                    seed,
                    status: status(&result),
                    failure: !result.as_ref().is_some_and(|r| r.within_bound == Some(true)),
                    l2_error: result.as_ref().and_then(|r| r.l2_error),
                    error_bound: bound.error_bound,
                    dl_bits: result.as_ref().and_then(|r| r.dl_bits),
                    residual: result.as_ref().and_then(|r| r.residual),
                    sigma_max: a.sigma_max(),
                    e2: e2_holds(&a, cfg.t),
                    candidates_examined: result.as_ref().map(|r| r.candidates_examined),
                    wall_ms: elapsed_ms(start, cfg.timing),
                })
            })
            .collect::<Result<_>>()
    })?;
    records.sort_by_key(|r| (r.n, r.trial));

    let mut summary = Vec::new();
    let mut criteria = Vec::new();
    for &(n, m, _, kappa, d, bound) in &plans {
        let rows: Vec<&CorollaryRecord> = records.iter().filter(|r| r.n == n).collect();
        let trials = rows.len() as u64;
        let failures = rows.iter().filter(|r| r.failure).count() as u64;
        let rate = failures as f64 / trials as f64;
        let allowed = bound.failure_probability + three_sigma(bound.failure_probability, trials);
        criteria.push(Criterion::new(
            format!("n={n}: failure rate <= n^(-alpha kappa) + 3 sigma"),
            rate <= allowed,
            format!("{failures}/{trials} errors above {:.6} (allowed rate {allowed:.3e})", bound.error_bound),
        ));
        summary.push(CorollarySummary {
            n,
            m,
            d,
            kappa,
            error_bound: bound.error_bound,
            trials,
            failures,
            failure_rate: rate,
            failure_probability: bound.failure_probability,
            allowed,
        });
    }
    Ok(Report { records, summary, criteria })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaRecord {
    pub check: &'static str,
    pub d: usize,
    pub n: usize,
    /// `tau` for the chi-square check, `t` for the singular-value check.
    pub parameter: f64,
    pub trials: u64,
    pub hits: u64,
    pub empirical: f64,
    pub bound: f64,
    pub allowed: f64,
    pub pass: bool,
}

/// Chi-square and largest-singular-value tail checks over the configured grid.
pub fn run_lemma_suite(cfg: &ExperimentConfig) -> Result<Report<LemmaRecord, ()>> {
    if cfg.lemma_trials == 0 || cfg.sigma_trials == 0 {
        return Err(McpError::Config("lemma trial counts must be at least 1".into()));
    }
    if cfg.lemma_tau.iter().any(|&t| !(t > 0.0 && t < 1.0)) || cfg.lemma_d.contains(&0) {
        return Err(McpError::Config("lemma grid needs d >= 1 and tau in (0, 1)".into()));
    }
    let mut records = Vec::new();
    let mut cell = 0u64;
    pool(cfg.workers)?.install(|| -> Result<()> {
        for &d in &cfg.lemma_d {
            for &tau in &cfg.lemma_tau {
                let c = mc_check_chi_lemma(d, tau, cfg.lemma_trials, derive_seed(cfg.seed, cell))?;
                cell += 1;
                records.push(LemmaRecord {
                    check: "chi_square",
                    d,
                    n: 4,
                    parameter: tau,
                    trials: c.trials,
                    hits: c.hits,
                    empirical: c.empirical,
                    bound: c.bound,
                    allowed: c.bound + three_sigma(c.bound, c.trials),
                    pass: c.pass,
                });
            }
        }
        for s in &cfg.sigma_cells {
            let c = sigma_max_tail_check(s.d, s.n, s.t, cfg.sigma_trials, derive_seed(cfg.seed, cell))?;
            cell += 1;
            records.push(LemmaRecord {
                check: "sigma_max",
                d: s.d,
                n: s.n,
                parameter: s.t,
                trials: c.trials,
                hits: c.hits,
                empirical: c.empirical,
                bound: c.bound,
                allowed: c.bound + three_sigma(c.bound, c.trials),
                pass: c.pass,
            });
        }
        Ok(())
    })?;
    let criteria = records
        .iter()
        .map(|r| {
            Criterion::new(
                format!("{} d={} n={} param={}", r.check, r.d, r.n, r.parameter),
                r.pass,
                format!("empirical {:.5} vs allowed {:.5}", r.empirical, r.allowed),
            )
        })
        .collect();
    Ok(Report { records, summary: (), criteria })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchRecord {
    pub class: String,
    pub n: usize,
    pub m: u32,
    /// Sparsity of the approximation, or its number of pieces.
    pub approx_size: usize,
    pub d: usize,
    pub epsilon_index: usize,
    pub trial: u64,
    pub seed: u64,
    pub epsilon: f64,
    pub approx_bound: f64,
    pub approx_error: f64,
    pub approx_ok: bool,
    pub status: Status,
    pub l2_error: Option<f64>,
    pub chain_bound: f64,
    pub within_bound: bool,
    pub dl_bits: Option<u64>,
    pub residual: Option<f64>,
    pub sigma_max: f64,
    pub e2: bool,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchCell {
    pub n: usize,
    pub d: usize,
    pub epsilon_index: usize,
    pub trials: u64,
    /// Unsolved trials count as infinite error.
    pub median_error: f64,
    pub approx_failures: u64,
    pub within_bound: u64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        let (a, b) = (v[k / 2 - 1], v[k / 2]);
        if a.is_infinite() || b.is_infinite() {
            a.max(b)
        } else {
            (a + b) / 2.0
        }
    }
}

fn mismatch_d(cfg: &ExperimentConfig, ni: usize, n: usize, m: u32, dl_class: &SignalClassSpec) -> Result<usize> {
    match cfg.d.len() {
        0 => {}
        1 => return Ok(cfg.d[0]),
        len if len == cfg.n.len() => return Ok(cfg.d[ni]),
        _ => return Err(McpError::Config("mismatch d grid must be empty, one value, or one per n".into())),
    }
    let log_n = (n as f64).log2();
    let base = match *dl_class {
        SignalClassSpec::Sparse { k } => (2 * k + 1) as f64,
        SignalClassSpec::PiecewisePoly { q, degree } => pp_dl_bound(q, degree, n, m)? / m as f64,
        other => return Err(McpError::Config(format!("no measurement rule for {other:?}"))),
    };
    Ok(((cfg.d_scale * base * log_n).ceil() as usize).max(1))
}

/// Smooth test function whose `(beta+1)`-th derivative stays below `gamma`.
fn smooth_signal<R: Rng>(beta: u32, gamma: f64, rng: &mut R) -> RaisedCosine {
    let w_max = (2.0 * gamma).powf(1.0 / (beta as f64 + 1.0)) / (2.0 * std::f64::consts::PI);
    RaisedCosine { frequency: w_max * (1.0 - rng.random::<f64>()) }
}

/// Recovery of near-structured signals by the tolerant program.
pub fn run_mismatch_scan(cfg: &ExperimentConfig) -> Result<Report<MismatchRecord, Vec<MismatchCell>>> {
    cfg.validate()?;
    if !matches!(cfg.class.as_str(), "lp_ball" | "smooth") {
        return Err(McpError::Config("the mismatch scan needs the lp_ball or smooth class".into()));
    }
    let eps_cells = cfg.epsilon.len().max(1);
    let mut jobs = Vec::new();
    for (ni, &n) in cfg.n.iter().enumerate() {
        for ei in 0..eps_cells {
            for trial in 0..cfg.trials {
                jobs.push((ni, n, ei, trial));
            }
        }
    }
    let mut records: Vec<MismatchRecord> = pool(cfg.workers)?.install(|| {
        jobs.par_iter().map(|&(ni, n, ei, trial)| mismatch_trial(cfg, ni, n, ei, trial)).collect::<Result<_>>()
    })?;
    records.sort_by_key(|r| (r.n, r.epsilon_index, r.trial));

    let mut cells = Vec::new();
    for &n in &cfg.n {
        for ei in 0..eps_cells {
            let rows: Vec<&MismatchRecord> = records.iter().filter(|r| r.n == n && r.epsilon_index == ei).collect();
            cells.push(MismatchCell {
                n,
                d: rows.first().map_or(0, |r| r.d),
                epsilon_index: ei,
                trials: rows.len() as u64,
                median_error: median(rows.iter().map(|r| r.l2_error.unwrap_or(f64::INFINITY)).collect()),
                approx_failures: rows.iter().filter(|r| !r.approx_ok).count() as u64,
                within_bound: rows.iter().filter(|r| r.within_bound).count() as u64,
            });
        }
    }
    let mut criteria = Vec::new();
    let approx_bad: u64 = cells.iter().map(|c| c.approx_failures).sum();
    criteria.push(Criterion::new(
        "approximation error within epsilon on every draw",
        approx_bad == 0,
        format!("{approx_bad} draws exceed their tolerance"),
    ));
    if cfg.n.len() > 1 {
        for ei in 0..eps_cells {
            let mut row: Vec<&MismatchCell> = cells.iter().filter(|c| c.epsilon_index == ei).collect();
            row.sort_by_key(|c| c.n);
            let ok = row.windows(2).all(|w| w[1].median_error < w[0].median_error);
            let trace: Vec<String> = row.iter().map(|c| format!("n={}: {:.3e}", c.n, c.median_error)).collect();
            criteria.push(Criterion::new(
                format!("epsilon cell {ei}: median error strictly decreasing in n"),
                ok,
                trace.join(", "),
            ));
        }
    }
    Ok(Report { records, summary: cells, criteria })
}

fn mismatch_trial(cfg: &ExperimentConfig, ni: usize, n: usize, ei: usize, trial: u64) -> Result<MismatchRecord> {
    let start = Instant::now();
    let m = cfg.bits_for(n);
    let seed = trial_seed(cfg.seed, ni, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let (x, approx, approx_size) = match cfg.class_spec(n)? {
        SignalClassSpec::LpBall { p } => {
            let x = gen_lp_ball(n, p, &mut rng)?;
            let k = cfg.sparsity(n).min(n);
            let approx = top_k_approx(&x, k, p)?;
            (x, approx, k)
        }
        SignalClassSpec::Smooth { beta, gamma } => {
            let f = smooth_signal(beta, gamma, &mut rng);
            let r = match cfg.width_rule {
                WidthRule::Literal => (n as f64).powf(-1.0 / beta as f64),
                WidthRule::Balanced => (n as f64).powf(-2.0 / (2.0 * beta as f64 + 1.0)),
            };
            let approx = piecewise_poly_fit(&f, n, r.min(1.0), beta)?;
            let pieces = (1.0 / r.min(1.0)).ceil() as usize;
            (crate::signals::SmoothFn::samples(&f, n), approx, pieces)
        }
        other => return Err(McpError::Config(format!("{other:?} is not a mismatch class"))),
    };
    let epsilon = cfg.epsilon.get(ei).copied().unwrap_or(approx.epsilon);
    let approx_error = l2_distance(&x, &approx.x_tilde);
    let d = mismatch_d(cfg, ni, n, m, &approx.dl_class)?;
    let a = sample_ensemble(d, n, derive_seed(seed, 1))?;
    let y = a.apply(&x)?;
    let kappa = match cfg.kappa {
        Some(k) => k,
        None => kappa_for(cfg, &approx.dl_class, n, m)?,
    };
    let budget = DlBudget::for_difference(kappa, cfg.delta, m)?;
    let mut solver = SolverConfig::new(&[approx.dl_class], m, budget).with_literal(cfg.include_literal);
    solver.candidate_cap = cfg.candidate_cap;
    let slack = cfg.slack_for(&SignalClassSpec::LpBall { p: cfg.p }, n);
    let bound = mismatch_error_bound(n, d, m, cfg.tau, cfg.t, epsilon)?;
    let mut result = solve(|| mcp_tolerant(&a, &y, epsilon, &solver, slack))?;
    if let Some(r) = result.as_mut() {
        r.evaluate(&x, bound)?;
    }
    Ok(MismatchRecord {
        class: cfg.class.clone(),
        n,
        m,
        approx_size,
        d,
        epsilon_index: ei,
        trial,
        seed,
        epsilon,
        approx_bound: approx.epsilon,
        approx_error,
        approx_ok: approx_error <= epsilon && approx_error <= approx.epsilon,
        status: status(&result),
        l2_error: result.as_ref().and_then(|r| r.l2_error),
        chain_bound: bound,
        within_bound: result.as_ref().is_some_and(|r| r.within_bound == Some(true)),
        dl_bits: result.as_ref().and_then(|r| r.dl_bits),
        residual: result.as_ref().and_then(|r| r.residual),
        sigma_max: a.sigma_max(),
        e2: e2_holds(&a, cfg.t),
        wall_ms: elapsed_ms(start, cfg.timing),
    })
}
