//! Cost functions, projector ansätze, the simplex search and landscape scans.

pub mod ansatz;
pub mod optimize;
pub mod scan;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::branchstate::{build_branched_state, BranchedState};
use crate::error::Result;
use crate::estimators::{dephased_purity, purity, ShotPlan};
use crate::histories::{FamilySpec, ModelSpec};
use crate::qmath::SubsystemSelector;

pub use ansatz::{AnsatzKind, AnsatzSpec};
pub use optimize::{optimize, optimize_objective, Candidate, Minimum, OptimizeResult, OptimizerConfig, RunSummary};
pub use scan::{landscape_scan, Axis, Grid, ScanRow};
pub use simplex::{nelder_mead, SimplexOptions, SimplexResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    #[default]
    Full,
    Partial,
    /// Full and partial costs; the partial cost is the objective.
    Both,
    /// Full cost normalized by the purity of the dephased ancilla state.
    Tilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostValue {
    pub c: f64,
    pub c_stderr: f64,
    pub c_pt: Option<f64>,
    pub c_pt_stderr: Option<f64>,
    pub p_diag: f64,
    pub p_diag_stderr: f64,
    pub c_tilde: Option<f64>,
    pub c_tilde_stderr: Option<f64>,
}

impl CostValue {
    /// Value and standard error of the quantity minimized under `mode`.
    pub fn objective(&self, mode: CostMode) -> (f64, f64) {
        match mode {
            CostMode::Full => (self.c, self.c_stderr),
            CostMode::Partial | CostMode::Both => (self.c_pt.unwrap_or(f64::NAN), self.c_pt_stderr.unwrap_or(0.0)),
            CostMode::Tilde => (self.c_tilde.unwrap_or(f64::NAN), self.c_tilde_stderr.unwrap_or(0.0)),
        }
    }
}

/// Costs of a branched state: `Tr(s^2) - Tr(Z(s)^2)` on `sigma_A` (full) and
/// on `sigma_SA` with only the ancillas dephased (partial).
pub fn cost_of_state(state: &BranchedState, mode: CostMode, plan: &ShotPlan) -> Result<CostValue> {
    let a_all = SubsystemSelector::all(state.ancilla_dims().len());
    let pa = purity(state.sigma_a(), &plan.derive("purity-a"))?;
    let za = dephased_purity(state.sigma_a(), &a_all, &plan.derive("dephased-a"))?;
    let c = pa.value - za.value;
    let c_stderr = pa.stderr.hypot(za.stderr);

    let (mut c_pt, mut c_pt_stderr) = (None, None);
    if matches!(mode, CostMode::Partial | CostMode::Both) {
        let on = state.ancilla_selector();
        let ps = purity(state.sigma_sa(), &plan.derive("purity-sa"))?;
        let zs = dephased_purity(state.sigma_sa(), &on, &plan.derive("dephased-sa"))?;
        c_pt = Some(ps.value - zs.value);
        c_pt_stderr = Some(ps.stderr.hypot(zs.stderr));
    }

    let (mut c_tilde, mut c_tilde_stderr) = (None, None);
    if plan.is_exact() {
        if za.value > 0.0 {
            c_tilde = Some(c / za.value);
            c_tilde_stderr = Some(0.0);
        }
    } else if mode == CostMode::Tilde {
        // independent P estimate, first-order error propagation of c / P
        let p = dephased_purity(state.sigma_a(), &a_all, &plan.derive("tilde-p"))?;
        if p.value > 0.0 {
            let ratio = c / p.value;
            c_tilde = Some(ratio);
            c_tilde_stderr = Some((c_stderr / p.value).hypot(ratio * p.stderr / p.value));
        }
    }

    Ok(CostValue {
        c,
        c_stderr,
        c_pt,
        c_pt_stderr,
        p_diag: za.value,
        p_diag_stderr: za.stderr,
        c_tilde,
        c_tilde_stderr,
    })
}

pub fn cost(model: &ModelSpec, family: &FamilySpec, mode: CostMode, plan: &ShotPlan) -> Result<CostValue> {
    cost_of_state(&build_branched_state(model, family)?, mode, plan)
}

/// Cost of the family an ansatz produces at `params`.
pub fn cost_at(model: &ModelSpec, ansatz: &AnsatzSpec, params: &[f64], mode: CostMode, plan: &ShotPlan) -> Result<CostValue> {
    cost(model, &ansatz.family(params)?, mode, plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::{check_consistency, decoherence_matrix, ConsistencyFlavor, RankPartition, TraceMode};
    use crate::models::{random_model, spin_field_family, spin_field_model, RandomModelDims, SpinFieldConfig};
    use crate::qmath::Operator;
    use proptest::prelude::*;

    #[test]
    fn single_history_costs_nothing() {
        let (model, _) = random_model(RandomModelDims::default(), 3);
        let fam = FamilySpec::uniform(
            model.s_dims().to_vec(),
            vec![Operator::identity(model.s_dims().to_vec()); model.k()],
            RankPartition::trivial(model.s_dim()),
        )
        .unwrap();
        let cv = cost(&model, &fam, CostMode::Both, &ShotPlan::exact()).unwrap();
        assert!(cv.c.abs() < 1e-12 && cv.c_pt.unwrap().abs() < 1e-12);
        assert!((cv.p_diag - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spin_field_points() {
        let model = spin_field_model(&SpinFieldConfig::default()).unwrap();
        let cv = cost(&model, &spin_field_family(2.0, 5.0).unwrap(), CostMode::Full, &ShotPlan::exact()).unwrap();
        assert!(cv.c.abs() < 1e-10);
        let cv = cost(&model, &spin_field_family(0.0, 0.0).unwrap(), CostMode::Tilde, &ShotPlan::exact()).unwrap();
        assert!((cv.c - 0.1709085765514323).abs() < 1e-12);
        assert!((cv.c_tilde.unwrap() - cv.c / cv.p_diag).abs() < 1e-15);
        assert_eq!(cv.objective(CostMode::Full), (cv.c, 0.0));
    }

    #[test]
    fn zero_cost_iff_consistent_on_valleys() {
        let model = spin_field_model(&SpinFieldConfig::default()).unwrap();
        for (p1, p2, zero) in [(2.0, 0.7, true), (0.4, 2.4, true), (0.4, 1.0, false), (0.0, 0.0, false)] {
            let fam = spin_field_family(p1, p2).unwrap();
            let c = cost(&model, &fam, CostMode::Full, &ShotPlan::exact()).unwrap().c;
            let d = decoherence_matrix(&model, &fam, TraceMode::Full).unwrap();
            let ok = check_consistency(&d, 1e-10, ConsistencyFlavor::Strong).unwrap().consistent;
            assert_eq!(ok, zero);
            assert_eq!(c < 1e-20, zero, "{c}");
        }
    }

    #[test]
    fn sampled_tilde_has_error_bar() {
        let model = spin_field_model(&SpinFieldConfig::default()).unwrap();
        let fam = spin_field_family(0.0, 0.0).unwrap();
        let cv = cost(&model, &fam, CostMode::Tilde, &ShotPlan::sampled(8192, 4).unwrap()).unwrap();
        let (v, se) = cv.objective(CostMode::Tilde);
        assert!(se > 0.0 && v.is_finite());
        let again = cost(&model, &fam, CostMode::Tilde, &ShotPlan::sampled(8192, 4).unwrap()).unwrap();
        assert_eq!(cv, again);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn cost_identities(seed in any::<u64>()) {
            let (model, fam) = random_model(RandomModelDims::default(), seed);
            let cv = cost(&model, &fam, CostMode::Both, &ShotPlan::exact()).unwrap();
            let full = decoherence_matrix(&model, &fam, TraceMode::Full).unwrap();
            let part = decoherence_matrix(&model, &fam, TraceMode::Partial).unwrap();
            prop_assert!((cv.c - full.off_diagonal_mass()).abs() < 1e-12);
            prop_assert!((cv.c_pt.unwrap() - part.off_diagonal_mass()).abs() < 1e-12);
            prop_assert!(cv.c >= -1e-12);
            prop_assert!(cv.c <= model.s_dim() as f64 * cv.c_pt.unwrap() + 1e-12);
            let n = full.len() as f64;
            let strong = check_consistency(&full, 1e-10, ConsistencyFlavor::Strong).unwrap().consistent;
            if strong {
                prop_assert!(cv.c <= n * n * 1e-20 + 1e-15);
            }
            if cv.c < 1e-20 {
                prop_assert!(strong);
            }
            let partial = check_consistency(&part, 1e-10, ConsistencyFlavor::Partial).unwrap().consistent;
            if cv.c_pt.unwrap() < 1e-20 {
                prop_assert!(partial);
            }
        }
    }
}
