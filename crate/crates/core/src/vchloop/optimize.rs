//! Restarted simplex search over ansatz parameters.

use std::sync::Mutex;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simplex::{nelder_mead, SimplexOptions};
use super::{cost_at, AnsatzSpec, CostMode, CostValue};
use crate::error::{Error, Result};
use crate::estimators::ShotPlan;
use crate::histories::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Random starting points, drawn uniformly over one period per parameter.
    pub restarts: usize,
    /// Explicit starting points, run before the random ones.
    pub starts: Vec<Vec<f64>>,
    pub max_evals: usize,
    pub simplex_scale: f64,
    /// Spread of simplex values at convergence in exact mode; sampled runs stop
    /// at twice the largest vertex standard error.
    pub f_tol: f64,
    pub x_tol: f64,
    /// Absolute acceptance threshold on the objective. Defaults to `1e-8` in
    /// exact mode and to three standard errors at the candidate when sampled.
    pub accept_threshold: Option<f64>,
    /// Max-norm radius, modulo the parameter period, within which accepted
    /// minima are merged.
    pub dedup_radius: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            starts: Vec::new(),
            max_evals: 2000,
            simplex_scale: 0.3,
            f_tol: 1e-10,
            x_tol: 1e-9,
            accept_threshold: None,
            dedup_radius: 0.1,
        }
    }
}

pub const EXACT_ACCEPT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub budget_exhausted: bool,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Reduced into `[0, period)`.
    pub params: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
    pub run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub params: Vec<f64>,
    pub cost: CostValue,
    pub run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub minima: Vec<Minimum>,
    pub runs: Vec<RunSummary>,
    pub total_evaluations: usize,
}

fn reduce(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period { 0.0 } else { r }
}

/// Max-norm distance between parameter vectors on the torus of the given period.
pub fn periodic_distance(a: &[f64], b: &[f64], period: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(period);
            d.min(period - d)
        })
        .fold(0.0, f64::max)
}

/// Runs every restart of the simplex search on `objective`, which receives
/// the parameters and a per-evaluation shot plan and returns `(value, stderr)`.
/// Returns the accepted, deduplicated candidates (best first) and one summary per run.
pub fn optimize_objective<F>(
    objective: F,
    n_params: usize,
    period: f64,
    cfg: &OptimizerConfig,
    plan: &ShotPlan,
) -> Result<(Vec<Candidate>, Vec<RunSummary>)>
where
    F: Fn(&[f64], &ShotPlan) -> Result<(f64, f64)> + Sync,
{
    if cfg.starts.is_empty() && cfg.restarts == 0 {
        return Err(Error::InvalidConfig("optimizer needs at least one start".into()));
    }
    if let Some(bad) = cfg.starts.iter().find(|s| s.len() != n_params) {
        return Err(Error::InvalidConfig(format!("start point {bad:?} does not have {n_params} parameters")));
    }
    let exact = plan.is_exact();
    let opts = SimplexOptions {
        scale: cfg.simplex_scale,
        f_tol: if exact { cfg.f_tol } else { 0.0 },
        x_tol: cfg.x_tol,
        max_evals: cfg.max_evals,
        noise_aware: !exact,
    };
    let total = cfg.starts.len() + cfg.restarts;

    let runs: Vec<RunSummary> = (0..total)
        .into_par_iter()
        .map(|run| {
            let run_plan = plan.derive("optimizer-run").derive_index(run as u64);
            let start = match cfg.starts.get(run) {
                Some(s) => s.clone(),
                None => {
                    let mut rng = run_plan.derive("start").rng();
                    (0..n_params).map(|_| rng.random_range(0.0..period)).collect()
                }
            };
            let error: Mutex<Option<Error>> = Mutex::new(None);
            let mut counter = 0u64;
            let res = nelder_mead(
                |x| {
                    let p = run_plan.derive_index(counter);
                    counter += 1;
                    match objective(x, &p) {
                        Ok(v) => v,
                        Err(e) => {
                            error.lock().expect("unpoisoned").get_or_insert(e);
                            (f64::NAN, 0.0)
                        }
                    }
                },
                &start,
                &opts,
            );
            if let Some(e) = error.into_inner().expect("unpoisoned") {
                return Err(e);
            }
            let threshold = cfg.accept_threshold.unwrap_or(if exact { EXACT_ACCEPT } else { 3.0 * res.stderr });
            Ok(RunSummary {
                run,
                start,
                end: res.x.iter().map(|&x| reduce(x, period)).collect(),
                value: res.value,
                stderr: res.stderr,
                evaluations: res.evaluations,
                converged: res.converged,
                budget_exhausted: res.budget_exhausted,
                accepted: res.value.is_finite() && res.value <= threshold,
            })
        })
        .collect::<Result<_>>()?;

    let mut accepted: Vec<&RunSummary> = runs.iter().filter(|r| r.accepted).collect();
    accepted.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.run.cmp(&b.run)));
    let mut kept: Vec<Candidate> = Vec::new();
    for r in accepted {
        if kept.iter().all(|k| periodic_distance(&k.params, &r.end, period) > cfg.dedup_radius) {
            kept.push(Candidate { params: r.end.clone(), value: r.value, stderr: r.stderr, run: r.run });
        }
    }
    Ok((kept, runs))
}

/// Minimizes the `mode` objective of the ansatz family and re-evaluates the
/// full cost record at each accepted minimum.
pub fn optimize(model: &ModelSpec, ansatz: &AnsatzSpec, mode: CostMode, plan: &ShotPlan, cfg: &OptimizerConfig) -> Result<OptimizeResult> {
    let objective = |x: &[f64], p: &ShotPlan| -> Result<(f64, f64)> { Ok(cost_at(model, ansatz, x, mode, p)?.objective(mode)) };
    let (candidates, runs) = optimize_objective(objective, ansatz.param_count(), ansatz.period(), cfg, plan)?;
    let minima = candidates
        .into_iter()
        .map(|c| {
            let p = plan.derive("minimum").derive_index(c.run as u64);
            Ok(Minimum { cost: cost_at(model, ansatz, &c.params, mode, &p)?, params: c.params, run: c.run })
        })
        .collect::<Result<_>>()?;
    let total_evaluations = runs.iter().map(|r| r.evaluations).sum();
    Ok(OptimizeResult { minima, runs, total_evaluations })
}
