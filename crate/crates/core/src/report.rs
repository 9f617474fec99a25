//! Probability readout with a precision cut, and approximate-consistency bounds.
//!
//! Histories whose readout count clears the threshold are retained; all others
//! are merged into one coarse-grained remainder history. For retained pairs
//! `eps = sqrt(C / (2 p p'))`, the remainder contributes
//! `delta = sqrt(p_remainder / p_min)`, and the overall bound is the largest of
//! these.

use serde::{Deserialize, Serialize};

use crate::branchstate::{build_branched_state, BranchedState};
use crate::error::{Error, Result};
use crate::estimators::{multinomial, ShotPlan};
use crate::histories::{enumerate_labels, FamilySpec, HistoryLabel, ModelSpec};
use crate::models::switch_probability;
use crate::vchloop::{cost_of_state, CostMode, CostValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutThreshold {
    /// Retain when the count is at least `ceil(1 / eps_max^2)`.
    #[default]
    Poisson,
    /// Retain when the count is at least `sqrt(n_readout) / eps_max`.
    Literal,
}

impl ReadoutThreshold {
    pub fn min_count(self, n_readout: u64, eps_max: f64) -> f64 {
        match self {
            ReadoutThreshold::Poisson => (1.0 / (eps_max * eps_max)).ceil(),
            ReadoutThreshold::Literal => (n_readout as f64).sqrt() / eps_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutPlan {
    pub n_readout: u64,
    /// Use the exact diagonal (expected counts) instead of sampling labels.
    pub exact: bool,
    pub seed: u64,
    pub eps_max: f64,
    pub threshold: ReadoutThreshold,
}

impl ReadoutPlan {
    pub fn exact(n_readout: u64, eps_max: f64) -> Self {
        Self { n_readout, exact: true, seed: 0, eps_max, threshold: ReadoutThreshold::Poisson }
    }

    pub fn sampled(n_readout: u64, eps_max: f64, seed: u64) -> Self {
        Self { n_readout, exact: false, seed, eps_max, threshold: ReadoutThreshold::Poisson }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_max > 0.0 && self.eps_max <= 1.0) {
            return Err(Error::InvalidConfig(format!("eps_max must lie in (0, 1], got {}", self.eps_max)));
        }
        if self.n_readout == 0 {
            return Err(Error::InvalidConfig("n_readout must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetainedHistory {
    pub label: HistoryLabel,
    pub probability: f64,
    /// Readout count; the expected count in exact mode.
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub retained: Vec<RetainedHistory>,
    pub remainder_probability: f64,
    pub n_readout: u64,
    pub min_count: f64,
    /// Weight of histories whose outcome changes between consecutive times.
    pub switch_probability: f64,
}

/// Reads history probabilities off the diagonal of `sigma_A`.
pub fn probability_readout(state: &BranchedState, plan: &ReadoutPlan) -> Result<Readout> {
    plan.validate()?;
    let labels = enumerate_labels(state.ancilla_dims());
    let exact_p = state.probabilities();
    let n = plan.n_readout as f64;
    let (probabilities, counts): (Vec<f64>, Vec<f64>) = if plan.exact {
        let p: Vec<f64> = exact_p.iter().map(|&x| x.max(0.0)).collect();
        let c = p.iter().map(|x| x * n).collect();
        (p, c)
    } else {
        let draws = multinomial(&ShotPlan { shots: crate::estimators::Shots::Finite(plan.n_readout), seed: plan.seed }, plan.n_readout, &exact_p);
        let c: Vec<f64> = draws.iter().map(|&x| x as f64).collect();
        (c.iter().map(|x| x / n).collect(), c)
    };
    let min_count = plan.threshold.min_count(plan.n_readout, plan.eps_max);
    let mut retained = Vec::new();
    let mut kept_mass = 0.0;
    for ((label, &p), &c) in labels.iter().zip(&probabilities).zip(&counts) {
        if c >= min_count && p > 0.0 {
            retained.push(RetainedHistory { label: label.clone(), probability: p, count: c });
            kept_mass += p;
        }
    }
    let total: f64 = probabilities.iter().sum();
    Ok(Readout {
        retained,
        remainder_probability: (total - kept_mass).max(0.0),
        n_readout: plan.n_readout,
        min_count,
        switch_probability: switch_probability(&labels, &probabilities),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPair {
    pub a: HistoryLabel,
    pub b: HistoryLabel,
    /// `None` when either probability is zero.
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBounds {
    pub pairs: Vec<EpsilonPair>,
    pub delta: Option<f64>,
    pub bound: Option<f64>,
}

/// Pairwise and remainder bounds from the full cost `c` (negative sampled
/// values are clipped at zero). With nothing retained there is no bound.
pub fn epsilon_bounds(c: f64, retained: &[RetainedHistory], remainder_probability: f64) -> EpsilonBounds {
    let c = c.max(0.0);
    let mut pairs = Vec::new();
    for (i, a) in retained.iter().enumerate() {
        for b in &retained[i + 1..] {
            let denom = 2.0 * a.probability * b.probability;
            let epsilon = (denom > 0.0).then(|| (c / denom).sqrt());
            pairs.push(EpsilonPair { a: a.label.clone(), b: b.label.clone(), epsilon });
        }
    }
    let p_min = retained.iter().map(|r| r.probability).fold(f64::INFINITY, f64::min);
    let delta = (p_min.is_finite() && p_min > 0.0).then(|| (remainder_probability.max(0.0) / p_min).sqrt());
    let bound = delta.map(|d| pairs.iter().filter_map(|p| p.epsilon).fold(d, f64::max));
    EpsilonBounds { pairs, delta, bound }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub retained: Vec<RetainedHistory>,
    pub remainder_probability: f64,
    pub n_readout: u64,
    pub min_count: f64,
    pub epsilon_pairs: Vec<EpsilonPair>,
    pub delta: Option<f64>,
    pub epsilon_bound: Option<f64>,
    /// Nothing cleared the readout threshold.
    pub high_entropy: bool,
    pub switch_probability: f64,
    pub cost_at_solution: CostValue,
}

/// Readout plus bounds for a branched state whose full-trace cost is `cost.c`.
pub fn build_report(state: &BranchedState, cost: CostValue, plan: &ReadoutPlan) -> Result<ConsistencyReport> {
    let readout = probability_readout(state, plan)?;
    let eps = epsilon_bounds(cost.c, &readout.retained, readout.remainder_probability);
    Ok(ConsistencyReport {
        high_entropy: readout.retained.is_empty(),
        retained: readout.retained,
        remainder_probability: readout.remainder_probability,
        n_readout: readout.n_readout,
        min_count: readout.min_count,
        epsilon_pairs: eps.pairs,
        delta: eps.delta,
        epsilon_bound: eps.bound,
        switch_probability: readout.switch_probability,
        cost_at_solution: cost,
    })
}

/// Re-evaluates a family found with the partial cost under the full-trace
/// cost and reports probabilities and bounds from the full-trace object.
pub fn partial_trace_handoff(model: &ModelSpec, family: &FamilySpec, cost_plan: &ShotPlan, readout: &ReadoutPlan) -> Result<ConsistencyReport> {
    let state = build_branched_state(model, family)?;
    let cost = cost_of_state(&state, CostMode::Both, cost_plan)?;
    build_report(&state, cost, readout)
}
