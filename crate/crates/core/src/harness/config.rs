//! Experiment configuration: `key = value` files plus overrides.

use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{McpError, Result};
use crate::signals::SignalClassSpec;
use crate::solver::{Slack, DEFAULT_CANDIDATE_CAP};

/// Interval width rule for the smooth-class piecewise fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthRule {
    /// `r = n^(-1/beta)`.
    Literal,
    /// `r = n^(-2/(2 beta + 1))`.
    Balanced,
}

/// Quantization slack granted to the solver's residual constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlackRule {
    /// Support-sized slack for sparse truths, dense slack otherwise.
    Auto,
    Dense,
    Support,
}

/// One Monte-Carlo cell of the largest-singular-value tail check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaCell {
    pub d: usize,
    pub n: usize,
    pub t: f64,
}

impl FromStr for SigmaCell {
    type Err = McpError;

    /// `DxNxT`, e.g. `40x256x1`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('x').collect();
        let bad = || McpError::Config(format!("sigma cell {s:?} is not DxNxT"));
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(SigmaCell {
            d: parts[0].trim().parse().map_err(|_| bad())?,
            n: parts[1].trim().parse().map_err(|_| bad())?,
            t: parts[2].trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// `sparse`, `piecewise_poly`, `lp_ball` or `smooth`.
    pub class: String,
    pub k: Option<usize>,
    pub q: usize,
    pub degree: usize,
    pub p: f64,
    pub beta: u32,
    pub gamma: f64,
    pub n: Vec<usize>,
    /// Fixed bit depth; otherwise `ceil(alpha log2 n)`.
    pub m: Option<u32>,
    pub alpha: f64,
    /// Measurement counts; the mismatch scan derives `d` when empty.
    pub d: Vec<usize>,
    /// Scale on the derived measurement count of the mismatch scan.
    pub d_scale: f64,
    /// Normalized complexity; otherwise the codec's bound divided by `m`.
    pub kappa: Option<f64>,
    pub delta: f64,
    pub tau: f64,
    pub t: f64,
    pub trials: u64,
    pub seed: u64,
    pub output: PathBuf,
    pub slack: SlackRule,
    /// Requested tolerances of the mismatch scan; empty uses each draw's
    /// approximation bound.
    pub epsilon: Vec<f64>,
    pub width_rule: WidthRule,
    pub workers: Option<usize>,
    pub candidate_cap: u64,
    pub include_literal: bool,
    pub check_events: bool,
    /// Adds a wall-time column, which makes output nondeterministic.
    pub timing: bool,
    /// Required success frequency at the largest `d`.
    pub min_success: Option<f64>,
    /// Required success-frequency gap between the largest and smallest `d`.
    pub min_drop: Option<f64>,
    pub lemma_d: Vec<usize>,
    pub lemma_tau: Vec<f64>,
    pub lemma_trials: u64,
    pub sigma_cells: Vec<SigmaCell>,
    pub sigma_trials: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            class: "sparse".into(),
            k: Some(2),
            q: 1,
            degree: 1,
            p: 0.5,
            beta: 1,
            gamma: 10.0,
            n: vec![256],
            m: None,
            alpha: 1.0,
            d: vec![5, 10, 20, 40],
            d_scale: 1.0,
            kappa: None,
            delta: 1.0,
            tau: 0.04,
            t: 1.0,
            trials: 200,
            seed: 0,
            output: PathBuf::from("mcp_out.csv"),
            slack: SlackRule::Auto,
            epsilon: Vec::new(),
            width_rule: WidthRule::Literal,
            workers: None,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            include_literal: false,
            check_events: true,
            timing: false,
            min_success: None,
            min_drop: None,
            lemma_d: vec![10, 50, 100],
            lemma_tau: vec![0.2, 0.5, 0.8],
            lemma_trials: 100_000,
            sigma_cells: vec![SigmaCell { d: 10, n: 10, t: 0.5 }, SigmaCell { d: 40, n: 256, t: 1.0 }],
            sigma_trials: 10_000,
        }
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| McpError::Config(format!("bad value {value:?} for {key}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| scalar(key, s)).collect()
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "auto" | "none" => Ok(None),
        v => scalar(key, v).map(Some),
    }
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        v => Err(McpError::Config(format!("bad boolean {v:?} for {key}"))),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| McpError::Config(format!("line {}: expected key = value", no + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| McpError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "class" => {
                let v = value.trim();
                if !["sparse", "piecewise_poly", "lp_ball", "smooth"].contains(&v) {
                    return Err(McpError::Config(format!("unknown class {v:?}")));
                }
                self.class = v.into();
            }
            "k" => self.k = optional(key, value)?,
            "q" => self.q = scalar(key, value)?,
            "degree" => self.degree = scalar(key, value)?,
            "p" => self.p = scalar(key, value)?,
            "beta" => self.beta = scalar(key, value)?,
            "gamma" => self.gamma = scalar(key, value)?,
            "n" => self.n = list(key, value)?,
            "m" => self.m = optional(key, value)?,
            "alpha" => self.alpha = scalar(key, value)?,
            "d" => self.d = list(key, value)?,
            "d_scale" => self.d_scale = scalar(key, value)?,
            "kappa" => self.kappa = optional(key, value)?,
            "delta" => self.delta = scalar(key, value)?,
            "tau" => self.tau = scalar(key, value)?,
            "t" => self.t = scalar(key, value)?,
            "trials" => self.trials = scalar(key, value)?,
            "seed" => self.seed = scalar(key, value)?,
            "output" => self.output = PathBuf::from(value.trim()),
            "slack" => {
                self.slack = match value.trim() {
                    "auto" => SlackRule::Auto,
                    "dense" => SlackRule::Dense,
                    "support" => SlackRule::Support,
                    v => return Err(McpError::Config(format!("unknown slack rule {v:?}"))),
                }
            }
            "epsilon" => self.epsilon = list(key, value)?,
            "width_rule" => {
                self.width_rule = match value.trim() {
                    "literal" => WidthRule::Literal,
                    "balanced" => WidthRule::Balanced,
                    v => return Err(McpError::Config(format!("unknown width rule {v:?}"))),
                }
            }
            "workers" => self.workers = optional(key, value)?,
            "candidate_cap" => self.candidate_cap = scalar(key, value)?,
            "include_literal" => self.include_literal = flag(key, value)?,
            "check_events" => self.check_events = flag(key, value)?,
            "timing" => self.timing = flag(key, value)?,
            "min_success" => self.min_success = optional(key, value)?,
            "min_drop" => self.min_drop = optional(key, value)?,
            "lemma_d" => self.lemma_d = list(key, value)?,
            "lemma_tau" => self.lemma_tau = list(key, value)?,
            "lemma_trials" => self.lemma_trials = scalar(key, value)?,
            "sigma_cells" => self.sigma_cells = list(key, value)?,
            "sigma_trials" => self.sigma_trials = scalar(key, value)?,
            other => return Err(McpError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<'a, I: IntoIterator<Item = &'a str>>(&mut self, items: I) -> Result<()> {
        for item in items {
            let (k, v) =
                item.split_once('=').ok_or_else(|| McpError::Config(format!("override {item:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Sparsity for `n`: the configured `k`, else `ceil(n^(p/2))` for the
    /// l_p class.
    pub fn sparsity(&self, n: usize) -> usize {
        match self.k {
            Some(k) => k,
            None => (n as f64).powf(self.p / 2.0).ceil() as usize,
        }
    }

    pub fn class_spec(&self, n: usize) -> Result<SignalClassSpec> {
        let spec = match self.class.as_str() {
            "sparse" => SignalClassSpec::Sparse { k: self.sparsity(n) },
            "piecewise_poly" => SignalClassSpec::PiecewisePoly { q: self.q, degree: self.degree },
            "lp_ball" => SignalClassSpec::LpBall { p: self.p },
            "smooth" => SignalClassSpec::Smooth { beta: self.beta, gamma: self.gamma },
            other => return Err(McpError::Config(format!("unknown class {other:?}"))),
        };
        spec.validate(n).map_err(|e| McpError::Config(e.to_string()))?;
        Ok(spec)
    }

    /// `m`, or `ceil(alpha log2 n)`.
    pub fn bits_for(&self, n: usize) -> u32 {
        self.m.unwrap_or_else(|| (self.alpha * (n as f64).log2()).ceil().max(1.0) as u32)
    }

    pub fn slack_for(&self, spec: &SignalClassSpec, support: usize) -> Slack {
        match (self.slack, spec) {
            (SlackRule::Dense, _) => Slack::Dense,
            (SlackRule::Support, _) => Slack::Support { s: support },
            (SlackRule::Auto, SignalClassSpec::Sparse { .. }) => Slack::Support { s: support },
            (SlackRule::Auto, _) => Slack::Dense,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(McpError::Config(msg));
        if self.n.is_empty() {
            return fail("n grid is empty".into());
        }
        if self.n.iter().any(|&n| n < 2) {
            return fail("every n must be at least 2".into());
        }
        if self.d.contains(&0) {
            return fail("measurement counts must be at least 1".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if let Some(m) = self.m {
            if m == 0 || m > 32 {
                return fail(format!("m = {m} outside 1..=32"));
            }
        }
        if !(self.alpha > 0.0) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return fail(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.t > 0.0) {
            return fail(format!("t must be positive, got {}", self.t));
        }
        if !(self.delta >= 0.0) {
            return fail(format!("delta must be nonnegative, got {}", self.delta));
        }
        if self.kappa.is_some_and(|k| !(k > 0.0)) {
            return fail("kappa must be positive".into());
        }
        if self.epsilon.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
            return fail("epsilon values must be finite and nonnegative".into());
        }
        if !(self.d_scale > 0.0) {
            return fail("d_scale must be positive".into());
        }
        if self.workers == Some(0) {
            return fail("workers must be at least 1".into());
        }
        for &n in &self.n {
            self.class_spec(n)?;
            let m = self.bits_for(n);
            if m > 32 {
                return fail(format!("derived m = {m} exceeds 32 at n = {n}"));
            }
        }
        Ok(())
    }
}
