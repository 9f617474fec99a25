//! Branched system-ancilla states.
//!
//! Every time step evolves `S (x) E`, rotates S into the projector basis
//! selected by the earlier records, writes the projector group of S into a
//! fresh ancilla with a controlled shift, and rotates back. After the sweep
//! `E` is traced out, leaving `sigma_SA = sum Tr_E(C_a rho C_b^dagger) (x) |a><b|`.
//!
//! The sweep runs on a purification of the initial state, so the cost is one
//! statevector per nonzero eigenvalue of `rho`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::histories::{FamilySpec, HistoryLabel, ModelSpec, TraceMode};
use crate::qmath::{partial_trace, Operator, SubsystemSelector, C64, ZERO};

/// Eigenvalues of `rho` below this are dropped from the purification.
const RANK_CUTOFF: f64 = 1e-15;
/// Trace tolerance on the assembled state.
pub const STATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BranchedState {
    sigma_sa: Operator,
    sigma_a: Operator,
    s_dims: Vec<usize>,
    ancilla_dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Scalar(C64),
    Block(Operator),
}

impl Element {
    pub fn scalar(&self) -> Option<C64> {
        match self {
            Element::Scalar(z) => Some(*z),
            Element::Block(_) => None,
        }
    }

    pub fn block(&self) -> Option<&Operator> {
        match self {
            Element::Scalar(_) => None,
            Element::Block(b) => Some(b),
        }
    }
}

impl BranchedState {
    /// Wraps an explicit `S (x) A` density matrix.
    pub fn from_sigma_sa(s_dims: Vec<usize>, ancilla_dims: Vec<usize>, sigma_sa: Operator) -> Result<Self> {
        let want: Vec<usize> = s_dims.iter().chain(ancilla_dims.iter()).copied().collect();
        if sigma_sa.dims() != want.as_slice() {
            return Err(Error::DimensionMismatch { expected: format!("{want:?}"), found: format!("{:?}", sigma_sa.dims()) });
        }
        sigma_sa.validate_density(STATE_TOL)?;
        Self::assemble(s_dims, ancilla_dims, sigma_sa)
    }

    fn assemble(s_dims: Vec<usize>, ancilla_dims: Vec<usize>, sigma_sa: Operator) -> Result<Self> {
        let trace = sigma_sa.trace();
        if (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("branched state has trace {trace}")));
        }
        let sigma_a = partial_trace(&sigma_sa, &SubsystemSelector::range(0..s_dims.len()))?;
        Ok(Self { sigma_sa, sigma_a, s_dims, ancilla_dims })
    }

    pub fn sigma_sa(&self) -> &Operator {
        &self.sigma_sa
    }

    pub fn sigma_a(&self) -> &Operator {
        &self.sigma_a
    }

    pub fn s_dims(&self) -> &[usize] {
        &self.s_dims
    }

    pub fn s_dim(&self) -> usize {
        self.s_dims.iter().product()
    }

    pub fn ancilla_dims(&self) -> &[usize] {
        &self.ancilla_dims
    }

    pub fn history_count(&self) -> usize {
        self.ancilla_dims.iter().product()
    }

    /// Selects the ancilla factors of `sigma_sa`.
    pub fn ancilla_selector(&self) -> SubsystemSelector {
        SubsystemSelector::range(self.s_dims.len()..self.s_dims.len() + self.ancilla_dims.len())
    }

    /// Diagonal of `sigma_A` in label order.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.history_count()).map(|i| self.sigma_a.get(i, i).re).collect()
    }

    /// `<a| sigma_A |b>` (full) or the S block `(1 (x) <a|) sigma_SA (1 (x) |b>)` (partial).
    pub fn element(&self, a: &HistoryLabel, b: &HistoryLabel, mode: TraceMode) -> Result<Element> {
        let i = a.index(&self.ancilla_dims)?;
        let j = b.index(&self.ancilla_dims)?;
        Ok(match mode {
            TraceMode::Full => Element::Scalar(self.sigma_a.get(i, j)),
            TraceMode::Partial => Element::Block(self.block(i, j)),
        })
    }

    /// S block at ancilla indices `(i, j)`.
    pub fn block(&self, i: usize, j: usize) -> Operator {
        let n = self.history_count();
        let ds = self.s_dim();
        let m = DMatrix::from_fn(ds, ds, |s, t| self.sigma_sa.get(s * n + i, t * n + j));
        Operator::new(self.s_dims.clone(), m).expect("block dims")
    }
}

/// Runs the record-keeping sweep and traces out the environment.
pub fn build_branched_state(model: &ModelSpec, family: &FamilySpec) -> Result<BranchedState> {
    if model.s_dims() != family.s_dims() {
        return Err(Error::DimensionMismatch {
            expected: format!("family on S = {:?}", model.s_dims()),
            found: format!("{:?}", family.s_dims()),
        });
    }
    if model.k() != family.k() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} ancillas", model.k()),
            found: format!("{}", family.k()),
        });
    }
    let ancilla_dims = family.ancilla_dims();
    let (ds, de) = (model.s_dim(), model.e_dim());
    let dse = ds * de;
    let na: usize = ancilla_dims.iter().product();
    // stride of ancilla digit j in the label index
    let mut strides = vec![1; ancilla_dims.len()];
    for j in (0..ancilla_dims.len().saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * ancilla_dims[j + 1];
    }

    let eig = model.rho().matrix().clone().symmetric_eigen();
    // One (S E) x A amplitude matrix per purification branch.
    let mut branches: Vec<(f64, DMatrix<C64>)> = Vec::new();
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > RANK_CUTOFF {
            let mut psi = DMatrix::from_element(dse, na, ZERO);
            psi.set_column(0, &eig.eigenvectors.column(idx));
            branches.push((lambda, psi));
        }
    }

    for (j, u) in model.unitaries().iter().enumerate() {
        let group_of = family.times()[j].partition.group_of();
        let m_j = ancilla_dims[j];
        // Basis change for every ancilla column, keyed by the earlier digits.
        let mut bases: Vec<Operator> = Vec::with_capacity(na);
        for a in 0..na {
            let prefix = HistoryLabel::from_index(a, &ancilla_dims).0[..j].to_vec();
            bases.push(family.effective_basis(j, &prefix)?);
        }
        for (_, psi) in branches.iter_mut() {
            *psi = u.matrix() * &*psi;
            let mut next = DMatrix::from_element(dse, na, ZERO);
            for a in 0..na {
                let b = bases[a].matrix();
                let col = psi.column(a);
                // rotate into the projector basis: (B^dagger (x) 1_E) psi
                let mut rotated = vec![ZERO; dse];
                for s in 0..ds {
                    for t in 0..ds {
                        let coef = b[(t, s)].conj();
                        if coef == ZERO {
                            continue;
                        }
                        for e in 0..de {
                            rotated[s * de + e] += coef * col[t * de + e];
                        }
                    }
                }
                // controlled shift of digit j by the group of s, then rotate back with the
                // basis of the target column (same earlier digits, so the same basis)
                for s in 0..ds {
                    let digit = (a / strides[j]) % m_j;
                    let target = a - digit * strides[j] + ((digit + group_of[s]) % m_j) * strides[j];
                    for t in 0..ds {
                        let coef = b[(t, s)];
                        if coef == ZERO {
                            continue;
                        }
                        for e in 0..de {
                            next[(t * de + e, target)] += coef * rotated[s * de + e];
                        }
                    }
                }
            }
            *psi = next;
        }
    }

    // sigma_SA = W W^dagger with W[(s, a), (branch, e)] = sqrt(lambda) psi[(s, e), a]
    let cols = branches.len() * de;
    let mut w = DMatrix::from_element(ds * na, cols, ZERO);
    for (bi, (lambda, psi)) in branches.iter().enumerate() {
        let amp = lambda.sqrt();
        for s in 0..ds {
            for e in 0..de {
                for a in 0..na {
                    w[(s * na + a, bi * de + e)] = psi[(s * de + e, a)] * amp;
                }
            }
        }
    }
    let sigma = &w * w.adjoint();
    let dims: Vec<usize> = model.s_dims().iter().chain(ancilla_dims.iter()).copied().collect();
    BranchedState::assemble(model.s_dims().to_vec(), ancilla_dims, Operator::new(dims, sigma)?)
}
