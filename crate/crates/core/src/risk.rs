//! Kernel regression over action candidates and tail-risk metrics on
//! empirical distributions.
//!
//! Quantile operators use exact finite-sample semantics: each of the `n`
//! samples carries mass `1/n`, and no interpolation happens. A product
//! `alpha · n` within [`RANK_TOLERANCE`] of an integer is treated as that
//! integer, so grid values such as `0.35` behave like their decimal intent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::AgentAction;

pub const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("empirical distribution is empty")]
    EmptyDistribution,
    #[error("risk probability must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("kernel regression undefined: zero density at the query action")]
    UndefinedRegression,
    #[error("confidence bound undefined: zero density at the query action")]
    UndefinedBound,
}

/// An action evaluated from one start state's tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionCandidate {
    pub action: AgentAction,
    /// Position of `action` in the discrete candidate action set.
    pub action_index: usize,
    /// Start state whose tree produced the estimate.
    pub source: usize,
    pub q_value: f64,
    pub visit_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    /// RBF kernel bandwidth.
    pub gamma_k: f64,
    /// Exploration constant of the lower confidence bound.
    pub c_lcb: f64,
    /// Tail probability.
    pub alpha: f64,
    /// Minimum per-tree density for a return particle.
    pub w_min: f64,
    /// Fraction of contributing start states a particle set must cover.
    pub c_m: f64,
    /// Candidates need strictly more root visits than this.
    pub visit_threshold: u64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            gamma_k: 4.0,
            c_lcb: 20.0,
            alpha: 0.5,
            w_min: 1.0,
            c_m: 0.5,
            visit_threshold: 3,
        }
    }
}

/// Gaussian radial basis function over the 2-D acceleration.
pub fn kernel(a: &AgentAction, b: &AgentAction, gamma_k: f64) -> f64 {
    (-gamma_k * a.squared_distance(b)).exp()
}

/// Visit-weighted kernel mass around `a`.
pub fn density(a: &AgentAction, candidates: &[ActionCandidate], gamma_k: f64) -> f64 {
    candidates
        .iter()
        .map(|b| kernel(a, &b.action, gamma_k) * b.visit_count as f64)
        .sum()
}

/// Nadaraya–Watson estimate of the value at `a`.
pub fn kr_value(a: &AgentAction, candidates: &[ActionCandidate], gamma_k: f64) -> Result<f64, RiskError> {
    let (mut num, mut den) = (0.0, 0.0);
    for b in candidates {
        let w = kernel(a, &b.action, gamma_k) * b.visit_count as f64;
        num += w * b.q_value;
        den += w;
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(RiskError::UndefinedRegression)
    }
}

/// Exploration penalty `c · sqrt(ln(total) / own)`, with the log clipped at 0.
fn exploration_penalty(c_lcb: f64, total_density: f64, own_density: f64) -> f64 {
    let log_total = total_density.ln().max(0.0);
    c_lcb * (log_total / own_density).sqrt()
}

/// Kernel-regression lower confidence bound of `a`.
pub fn krlcb(a: &AgentAction, candidates: &[ActionCandidate], cfg: &RiskConfig) -> Result<f64, RiskError> {
    let own = density(a, candidates, cfg.gamma_k);
    if !(own > 0.0) {
        return Err(RiskError::UndefinedBound);
    }
    let total: f64 = candidates
        .iter()
        .map(|b| density(&b.action, candidates, cfg.gamma_k))
        .sum();
    let value = kr_value(a, candidates, cfg.gamma_k)?;
    Ok(value - exploration_penalty(cfg.c_lcb, total, own))
}

/// Density and regression value of every candidate over a pooled set.
///
/// Candidates sharing an action share their statistics, so the work is done
/// once per distinct action rather than once per candidate.
#[derive(Debug, Clone)]
pub struct KernelRegression {
    /// Per candidate, in input order.
    pub densities: Vec<f64>,
    pub values: Vec<f64>,
    pub total_density: f64,
}

impl KernelRegression {
    pub fn fit(candidates: &[ActionCandidate], gamma_k: f64) -> Result<Self, RiskError> {
        let mut distinct: Vec<(usize, f64, f64)> = Vec::new(); // (action_index, density, value)
        let mut densities = Vec::with_capacity(candidates.len());
        let mut values = Vec::with_capacity(candidates.len());
        for c in candidates {
            let cached = distinct.iter().find(|(idx, _, _)| *idx == c.action_index);
            let (w, v) = match cached {
                Some(&(_, w, v)) => (w, v),
                None => {
                    let w = density(&c.action, candidates, gamma_k);
                    let v = kr_value(&c.action, candidates, gamma_k)?;
                    distinct.push((c.action_index, w, v));
                    (w, v)
                }
            };
            densities.push(w);
            values.push(v);
        }
        let total_density = densities.iter().sum();
        Ok(Self {
            densities,
            values,
            total_density,
        })
    }

    /// Lower confidence bound of candidate `i`.
    pub fn krlcb(&self, i: usize, c_lcb: f64) -> Result<f64, RiskError> {
        let own = self.densities[i];
        if !(own > 0.0) {
            return Err(RiskError::UndefinedBound);
        }
        Ok(self.values[i] - exploration_penalty(c_lcb, self.total_density, own))
    }
}

fn check(samples: &[f64], alpha: f64) -> Result<(), RiskError> {
    if samples.is_empty() {
        return Err(RiskError::EmptyDistribution);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RiskError::InvalidAlpha(alpha));
    }
    Ok(())
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn tail_scale(n: usize) -> f64 {
    RANK_TOLERANCE * n.max(1) as f64
}

/// Index into the ascending sort of the smallest `z` with `P(Z > z) ≤ alpha`.
fn var_rank(n: usize, alpha: f64) -> usize {
    let allowed_above = (alpha * n as f64 + tail_scale(n)).floor() as usize;
    n - 1 - allowed_above.min(n - 1)
}

/// Index into the ascending sort of the smallest `z` with `P(Z > z) < alpha`.
fn var_plus_rank(n: usize, alpha: f64) -> usize {
    let strictly_below = (alpha * n as f64 - tail_scale(n)).ceil() as usize;
    let allowed_above = strictly_below.saturating_sub(1).min(n - 1);
    n - 1 - allowed_above
}

/// Value at risk: `min { z | P(Z > z) ≤ alpha }`.
pub fn var(costs: &[f64], alpha: f64) -> Result<f64, RiskError> {
    check(costs, alpha)?;
    Ok(sorted(costs)[var_rank(costs.len(), alpha)])
}

/// Upper value at risk: `inf { z | P(Z > z) < alpha }`.
pub fn var_plus(samples: &[f64], alpha: f64) -> Result<f64, RiskError> {
    check(samples, alpha)?;
    Ok(sorted(samples)[var_plus_rank(samples.len(), alpha)])
}

fn mean_where(samples: &[f64], keep: impl Fn(f64) -> bool) -> f64 {
    let (sum, count) = samples
        .iter()
        .filter(|&&z| keep(z))
        .fold((0.0, 0usize), |(s, c), &z| (s + z, c + 1));
    sum / count as f64
}

/// Conditional value at risk of a cost distribution: mean of the costs at or
/// above [`var`].
pub fn cvar(costs: &[f64], alpha: f64) -> Result<f64, RiskError> {
    let threshold = var(costs, alpha)?;
    Ok(mean_where(costs, |z| z >= threshold))
}

/// Reward-side counterpart of [`cvar`]: mean of the returns at or below
/// `var_plus(returns, 1 - alpha)`. Maximizing it is the same as minimizing
/// the CVaR of the negated returns.
pub fn ccvar(returns: &[f64], alpha: f64) -> Result<f64, RiskError> {
    check(returns, alpha)?;
    let threshold = var_plus(returns, 1.0 - alpha)?;
    Ok(mean_where(returns, |z| z <= threshold))
}

/// Equally weighted finite sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(samples: Vec<f64>) -> Result<Self, RiskError> {
        if samples.is_empty() {
            return Err(RiskError::EmptyDistribution);
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn var(&self, alpha: f64) -> Result<f64, RiskError> {
        var(&self.samples, alpha)
    }

    pub fn var_plus(&self, alpha: f64) -> Result<f64, RiskError> {
        var_plus(&self.samples, alpha)
    }

    pub fn cvar(&self, alpha: f64) -> Result<f64, RiskError> {
        cvar(&self.samples, alpha)
    }

    pub fn ccvar(&self, alpha: f64) -> Result<f64, RiskError> {
        ccvar(&self.samples, alpha)
    }
}
