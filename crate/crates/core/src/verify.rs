//! Self-check suites over a seeded random corpus: agreement of the two routes
//! to the decoherence functional, and the purity-difference cost identities.
//!
//! A [`Mutation`] deliberately breaks one ingredient so the suites can be
//! shown to catch it.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branchstate::{build_branched_state, BranchedState};
use crate::error::Result;
use crate::estimators::{purity, ShotPlan};
use crate::histories::{decoherence_matrix, FamilySpec, ModelSpec, TraceMode};
use crate::models::{random_model, RandomModelDims};
use crate::qmath::{Operator, SubsystemSelector};

pub const VERIFY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    #[default]
    None,
    /// The branched-state route evolves with `U^dagger` instead of `U`.
    SignFlip,
    /// Dephased purities read the entries `(i, i+1 mod n)` instead of the diagonal.
    DephasePermutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub passed: bool,
    /// Seed and error of the first case above tolerance.
    pub first_failure: Option<(u64, f64)>,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {} cases, max error {:.3e}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.cases, self.max_error)?;
        if let Some((seed, err)) = self.first_failure {
            write!(f, " (first failure: seed {seed}, error {err:.3e})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn first_failure(&self) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| !s.passed)
    }
}

fn corpus(seeds: std::ops::Range<u64>) -> Vec<(u64, ModelSpec, FamilySpec)> {
    seeds
        .map(|s| {
            let (m, f) = random_model(RandomModelDims::default(), s);
            (s, m, f)
        })
        .collect()
}

fn branched(model: &ModelSpec, family: &FamilySpec, mutation: Mutation) -> Result<BranchedState> {
    if mutation == Mutation::SignFlip {
        let flipped = model.with_unitaries(model.unitaries().iter().map(Operator::adjoint).collect())?;
        build_branched_state(&flipped, family)
    } else {
        build_branched_state(model, family)
    }
}

/// `Tr(Z(state)^2)` over the selected subsystems, or its mutated reading.
fn dephased(state: &Operator, on: &SubsystemSelector, mutation: Mutation) -> Result<f64> {
    if mutation != Mutation::DephasePermutation {
        return Ok(crate::estimators::dephased_purity(state, on, &ShotPlan::exact())?.value);
    }
    let na: usize = on.indices().iter().map(|&i| state.dims()[i]).product();
    let rest: Vec<usize> = (0..state.dims().len()).filter(|i| !on.indices().contains(i)).collect();
    if rest.is_empty() {
        return Ok((0..na).map(|a| state.get(a, (a + 1) % na).norm_sqr()).sum());
    }
    // pair selected-subsystem block a with block a+1
    let perm = permute_front(state, on)?;
    let dr = perm.side() / na;
    let mut acc = 0.0;
    for a in 0..na {
        let b = (a + 1) % na;
        for r in 0..dr {
            for s in 0..dr {
                acc += perm.get(a * dr + r, b * dr + s).norm_sqr();
            }
        }
    }
    Ok(acc)
}

/// Reorders subsystems so the selected ones come first (in selector order).
fn permute_front(state: &Operator, on: &SubsystemSelector) -> Result<Operator> {
    let dims = state.dims();
    let mut order: Vec<usize> = on.indices().to_vec();
    order.extend((0..dims.len()).filter(|i| !on.indices().contains(i)));
    let new_dims: Vec<usize> = order.iter().map(|&i| dims[i]).collect();
    let n = state.side();
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let map: Vec<usize> = (0..n)
        .map(|new_idx| {
            let mut rem = new_idx;
            let mut old = 0;
            for (pos, &sub) in order.iter().enumerate().rev() {
                let d = new_dims[pos];
                old += (rem % d) * strides[sub];
                rem /= d;
            }
            old
        })
        .collect();
    let m = nalgebra::DMatrix::from_fn(n, n, |r, c| state.get(map[r], map[c]));
    Operator::new(new_dims, m)
}

fn summarize(name: &str, errors: Vec<(u64, f64)>) -> SuiteResult {
    let max_error = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let first_failure = errors.iter().find(|e| e.1.is_nan() || e.1 >= VERIFY_TOL).copied();
    SuiteResult { name: name.to_string(), cases: errors.len(), max_error, passed: first_failure.is_none(), first_failure }
}

/// Max entrywise gap between the branched state and the direct products, in
/// both trace modes.
pub fn route_equivalence(seeds: std::ops::Range<u64>, mutation: Mutation) -> Result<SuiteResult> {
    let errors = corpus(seeds)
        .par_iter()
        .map(|(seed, model, family)| {
            let st = branched(model, family, mutation)?;
            let full = decoherence_matrix(model, family, TraceMode::Full)?;
            let part = decoherence_matrix(model, family, TraceMode::Partial)?;
            let mut err = 0.0f64;
            for i in 0..full.len() {
                for j in 0..full.len() {
                    err = err.max((st.sigma_a().get(i, j) - full.scalar(i, j)).norm());
                    err = err.max(st.block(i, j).max_abs_diff(part.block(i, j).expect("partial mode")));
                }
            }
            Ok((*seed, err))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize("route-equivalence", errors))
}

/// Gap between the purity-difference costs and the off-diagonal masses of the
/// direct decoherence matrices.
pub fn cost_identities(seeds: std::ops::Range<u64>, mutation: Mutation) -> Result<SuiteResult> {
    let errors = corpus(seeds)
        .par_iter()
        .map(|(seed, model, family)| {
            let st = branched(model, family, mutation)?;
            let exact = ShotPlan::exact();
            let a_all = SubsystemSelector::all(st.ancilla_dims().len());
            let c = purity(st.sigma_a(), &exact)?.value - dephased(st.sigma_a(), &a_all, mutation)?;
            let c_pt = purity(st.sigma_sa(), &exact)?.value - dephased(st.sigma_sa(), &st.ancilla_selector(), mutation)?;
            let full = decoherence_matrix(model, family, TraceMode::Full)?.off_diagonal_mass();
            let part = decoherence_matrix(model, family, TraceMode::Partial)?.off_diagonal_mass();
            Ok((*seed, (c - full).abs().max((c_pt - part).abs())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize("cost-identities", errors))
}

/// Both suites over seeds `0..cases`.
pub fn run_verify(cases: u64, mutation: Mutation) -> Result<VerifyReport> {
    Ok(VerifyReport { suites: vec![route_equivalence(0..cases, mutation)?, cost_identities(0..cases, mutation)?] })
}
