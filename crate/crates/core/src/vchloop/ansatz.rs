//! Parameterized projector bases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histories::{FamilySpec, RankPartition};
use crate::models::{azimuth_basis, bloch_basis};
use crate::qmath::{gates, tensor_all, Operator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AnsatzKind {
    /// One qubit, projectors on the `(cos phi, sin phi, 0)` axis; one angle.
    AzimuthXy,
    /// One qubit, projectors on the `(theta, phi)` Bloch axis; two angles.
    BlochAxis,
    /// One qubit, basis `Rz(a) Ry(b) Rz(c)`; three angles.
    SingleQubitGeneral,
    /// `qubits` qubits; each layer is a chain of two-qubit blocks
    /// `CNOT (Ry Rz (x) Ry Rz)` on neighbours, four angles per block.
    LayeredMultiQubit { qubits: usize, layers: usize },
}

impl AnsatzKind {
    pub fn params_per_time(&self) -> usize {
        match *self {
            AnsatzKind::AzimuthXy => 1,
            AnsatzKind::BlochAxis => 2,
            AnsatzKind::SingleQubitGeneral => 3,
            AnsatzKind::LayeredMultiQubit { qubits, layers } => 4 * qubits.saturating_sub(1) * layers,
        }
    }

    pub fn s_dims(&self) -> Vec<usize> {
        match *self {
            AnsatzKind::LayeredMultiQubit { qubits, .. } => vec![2; qubits],
            _ => vec![2],
        }
    }

    /// Period of every parameter as seen by the projectors.
    pub fn period(&self) -> f64 {
        match self {
            AnsatzKind::AzimuthXy => std::f64::consts::PI,
            _ => 2.0 * std::f64::consts::PI,
        }
    }

    /// Basis unitary for one time from its parameter block.
    pub fn basis(&self, p: &[f64]) -> Operator {
        match *self {
            AnsatzKind::AzimuthXy => azimuth_basis(p[0]),
            AnsatzKind::BlochAxis => bloch_basis(p[0], p[1]),
            AnsatzKind::SingleQubitGeneral => gates::rz(p[0]).mul(&gates::ry(p[1])).and_then(|m| m.mul(&gates::rz(p[2]))).expect("2x2"),
            AnsatzKind::LayeredMultiQubit { qubits, layers } => {
                let dims = vec![2; qubits];
                let id = Operator::identity(vec![2]);
                let mut u = Operator::identity(dims.clone());
                let mut it = p.chunks_exact(4);
                for _ in 0..layers {
                    for q in 0..qubits.saturating_sub(1) {
                        let a = it.next().expect("parameter count checked");
                        let local = |t: f64, z: f64| gates::ry(t).mul(&gates::rz(z)).expect("2x2");
                        let pair = gates::cnot().mul(&crate::qmath::tensor(&local(a[0], a[1]), &local(a[2], a[3]))).expect("4x4");
                        let mut factors: Vec<Operator> = Vec::new();
                        factors.extend(std::iter::repeat_n(id.clone(), q));
                        factors.push(pair.with_dims(vec![4]).expect("4"));
                        factors.extend(std::iter::repeat_n(id.clone(), qubits - q - 2));
                        let block = tensor_all(&factors).with_dims(dims.clone()).expect("dims");
                        u = block.mul(&u).expect("dims");
                    }
                }
                u
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub kind: AnsatzKind,
    /// Number of projection times.
    pub k: usize,
    /// One shared parameter block for all times.
    #[serde(default)]
    pub stationary: bool,
    /// Projector grouping applied at every time; fine when absent.
    #[serde(default)]
    pub partition: Option<RankPartition>,
}

impl AnsatzSpec {
    pub fn new(kind: AnsatzKind, k: usize, stationary: bool) -> Result<Self> {
        let spec = Self { kind, k, stationary, partition: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_partition(mut self, partition: RankPartition) -> Result<Self> {
        self.partition = Some(partition);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidAnsatz("k must be at least 1".into()));
        }
        if let AnsatzKind::LayeredMultiQubit { qubits, layers } = self.kind {
            if qubits < 2 || layers == 0 {
                return Err(Error::InvalidAnsatz("layered ansatz needs at least 2 qubits and 1 layer".into()));
            }
        }
        if let Some(p) = &self.partition {
            let s_dim: usize = self.kind.s_dims().iter().product();
            RankPartition::new(p.groups().to_vec(), s_dim).map_err(|e| Error::InvalidAnsatz(e.to_string()))?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.kind.params_per_time() * if self.stationary { 1 } else { self.k }
    }

    pub fn period(&self) -> f64 {
        self.kind.period()
    }

    pub fn family(&self, params: &[f64]) -> Result<FamilySpec> {
        if params.len() != self.param_count() {
            return Err(Error::InvalidAnsatz(format!("expected {} parameters, got {}", self.param_count(), params.len())));
        }
        let per = self.kind.params_per_time();
        let bases = (0..self.k)
            .map(|j| {
                let block = if self.stationary { params } else { &params[j * per..(j + 1) * per] };
                self.kind.basis(block)
            })
            .collect();
        let s_dims = self.kind.s_dims();
        let partition = self.partition.clone().unwrap_or_else(|| RankPartition::fine(s_dims.iter().product()));
        FamilySpec::uniform(s_dims, bases, partition)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::projector;
    use crate::qmath::{C64, ONE};
    use proptest::prelude::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(AnsatzSpec::new(AnsatzKind::AzimuthXy, 2, false).unwrap().param_count(), 2);
        assert_eq!(AnsatzSpec::new(AnsatzKind::BlochAxis, 5, true).unwrap().param_count(), 2);
        assert_eq!(AnsatzSpec::new(AnsatzKind::SingleQubitGeneral, 3, false).unwrap().param_count(), 9);
        let l = AnsatzKind::LayeredMultiQubit { qubits: 3, layers: 2 };
        assert_eq!(AnsatzSpec::new(l, 2, false).unwrap().param_count(), 32);
        assert!(AnsatzSpec::new(AnsatzKind::AzimuthXy, 0, false).is_err());
        assert!(AnsatzSpec::new(AnsatzKind::LayeredMultiQubit { qubits: 1, layers: 1 }, 1, false).is_err());
        let a = AnsatzSpec::new(AnsatzKind::AzimuthXy, 2, false).unwrap();
        assert!(a.family(&[0.1]).is_err());
    }

    #[test]
    fn stationary_repeats_the_block() {
        let a = AnsatzSpec::new(AnsatzKind::BlochAxis, 3, true).unwrap();
        let f = a.family(&[0.4, 1.1]).unwrap();
        for t in f.times() {
            assert_eq!(t.basis, f.times()[0].basis);
        }
    }

    #[test]
    fn azimuth_projector_axis() {
        let a = AnsatzSpec::new(AnsatzKind::AzimuthXy, 1, false).unwrap();
        let phi = 0.9;
        let p = projector(&a.family(&[phi]).unwrap(), 0, &[], 0).unwrap();
        // (1 + cos phi X + sin phi Y) / 2
        let want = Operator::identity(vec![2])
            .add(&gates::pauli_x().scale(C64::new(phi.cos(), 0.0)))
            .and_then(|m| m.add(&gates::pauli_y().scale(C64::new(phi.sin(), 0.0))))
            .unwrap()
            .scale(C64::new(0.5, 0.0));
        assert!(p.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn layered_single_layer_matches_hand_product() {
        let kind = AnsatzKind::LayeredMultiQubit { qubits: 2, layers: 1 };
        let p = [0.3, -0.2, 1.1, 0.7];
        let u = kind.basis(&p);
        let l = |t: f64, z: f64| gates::ry(t).mul(&gates::rz(z)).unwrap();
        let want = gates::cnot().mul(&crate::qmath::tensor(&l(0.3, -0.2), &l(1.1, 0.7))).unwrap();
        assert!(u.max_abs_diff(&want.with_dims(vec![2, 2]).unwrap()) < 1e-15);
        let uu = u.adjoint().mul(&u).unwrap();
        assert!(uu.max_abs_diff(&Operator::identity(vec![2, 2])) < 1e-13);
    }

    #[test]
    fn zero_parameters_give_standard_basis() {
        let a = AnsatzSpec::new(AnsatzKind::SingleQubitGeneral, 1, false).unwrap();
        let p = projector(&a.family(&[0.0; 3]).unwrap(), 0, &[], 0).unwrap();
        assert!(p.max_abs_diff(&Operator::diag(&[ONE, crate::qmath::ZERO])) < 1e-15);
    }

    proptest! {
        #[test]
        fn projectors_repeat_with_the_period(kind_idx in 0usize..4, raw in proptest::collection::vec(-7.0f64..7.0, 8), which in 0usize..8) {
            let kind = [
                AnsatzKind::AzimuthXy,
                AnsatzKind::BlochAxis,
                AnsatzKind::SingleQubitGeneral,
                AnsatzKind::LayeredMultiQubit { qubits: 2, layers: 2 },
            ][kind_idx];
            let a = AnsatzSpec::new(kind, 1, false).unwrap();
            let n = a.param_count();
            let params: Vec<f64> = (0..n).map(|i| raw[i % raw.len()] + i as f64).collect();
            let mut shifted = params.clone();
            shifted[which % n] += a.period();
            let (f, g) = (a.family(&params).unwrap(), a.family(&shifted).unwrap());
            // the projector set is unchanged; the azimuth half-turn swaps its two members
            let m = f.ancilla_dims()[0];
            for o in 0..m {
                let p = projector(&f, 0, &[], o).unwrap();
                let hit = (0..m).any(|o2| projector(&g, 0, &[], o2).unwrap().max_abs_diff(&p) < 1e-12);
                prop_assert!(hit);
            }
        }
    }
}
