//! Models, history families, class operators and the decoherence functional
//! computed by direct operator products.
//!
//! Times are indexed from zero in this API: time `j` is the `(j+1)`-th
//! projection, preceded by segment `j` of the model.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{evolve_unitary, tensor, Operator, C64, ONE, ZERO};

/// Tolerance for state and completeness checks on model inputs.
pub const MODEL_TOL: f64 = 1e-12;
/// Diagonal entries below this are treated as zero probability.
pub const ZERO_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Clone)]
pub enum Segment {
    Unitary(Operator),
    Hamiltonian { h: Operator, dt: f64 },
}

impl Segment {
    pub fn unitary(&self) -> Result<Operator> {
        match self {
            Segment::Unitary(u) => Ok(u.clone()),
            Segment::Hamiltonian { h, dt } => evolve_unitary(h, *dt),
        }
    }
}

/// Initial state and dynamics on `S (x) E`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    rho: Operator,
    segments: Vec<Segment>,
    unitaries: Vec<Operator>,
    s_dims: Vec<usize>,
    e_dims: Vec<usize>,
}

impl ModelSpec {
    pub fn new(rho: Operator, segments: Vec<Segment>, s_dims: Vec<usize>, e_dims: Vec<usize>) -> Result<Self> {
        let se_dims: Vec<usize> = s_dims.iter().chain(e_dims.iter()).copied().collect();
        if s_dims.is_empty() {
            return Err(Error::InvalidModel("system S has no subsystems".into()));
        }
        if rho.dims() != se_dims.as_slice() {
            return Err(Error::DimensionMismatch {
                expected: format!("rho on {se_dims:?}"),
                found: format!("{:?}", rho.dims()),
            });
        }
        rho.validate_density(MODEL_TOL)
            .map_err(|e| Error::InvalidModel(format!("initial state: {e}")))?;
        if segments.is_empty() {
            return Err(Error::InvalidModel("at least one segment is required".into()));
        }
        let mut unitaries = Vec::with_capacity(segments.len());
        for (j, seg) in segments.iter().enumerate() {
            let u = seg.unitary()?;
            if u.dims() != se_dims.as_slice() {
                return Err(Error::DimensionMismatch {
                    expected: format!("segment {j} on {se_dims:?}"),
                    found: format!("{:?}", u.dims()),
                });
            }
            let uu = u.adjoint().mul(&u)?;
            let dev = uu.max_abs_diff(&Operator::identity(se_dims.clone()));
            if dev > 1e-10 {
                return Err(Error::InvalidModel(format!("segment {j} is not unitary (deviation {dev:e})")));
            }
            unitaries.push(u);
        }
        Ok(Self { rho, segments, unitaries, s_dims, e_dims })
    }

    /// Same initial state and layout, different segment unitaries.
    pub fn with_unitaries(&self, unitaries: Vec<Operator>) -> Result<Self> {
        Self::new(
            self.rho.clone(),
            unitaries.into_iter().map(Segment::Unitary).collect(),
            self.s_dims.clone(),
            self.e_dims.clone(),
        )
    }

    pub fn rho(&self) -> &Operator {
        &self.rho
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn unitaries(&self) -> &[Operator] {
        &self.unitaries
    }

    /// Number of projection times.
    pub fn k(&self) -> usize {
        self.unitaries.len()
    }

    pub fn s_dims(&self) -> &[usize] {
        &self.s_dims
    }

    pub fn e_dims(&self) -> &[usize] {
        &self.e_dims
    }

    pub fn s_dim(&self) -> usize {
        self.s_dims.iter().product()
    }

    pub fn e_dim(&self) -> usize {
        self.e_dims.iter().product()
    }

    pub fn se_dims(&self) -> Vec<usize> {
        self.s_dims.iter().chain(self.e_dims.iter()).copied().collect()
    }
}

/// Ordered partition of the S basis into projector groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankPartition {
    groups: Vec<Vec<usize>>,
}

impl RankPartition {
    pub fn new(groups: Vec<Vec<usize>>, s_dim: usize) -> Result<Self> {
        let mut seen = vec![false; s_dim];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::InvalidFamily("empty projector group".into()));
            }
            for &i in g {
                if i >= s_dim {
                    return Err(Error::InvalidFamily(format!("basis index {i} outside S of dimension {s_dim}")));
                }
                if seen[i] {
                    return Err(Error::InvalidFamily(format!("basis index {i} appears twice")));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidFamily(format!("basis index {missing} not covered")));
        }
        Ok(Self { groups })
    }

    /// Every basis state in its own group.
    pub fn fine(s_dim: usize) -> Self {
        Self { groups: (0..s_dim).map(|i| vec![i]).collect() }
    }

    /// A single group: the trivial projector set `{1}`.
    pub fn trivial(s_dim: usize) -> Self {
        Self { groups: vec![(0..s_dim).collect()] }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn s_dim(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// `group_of()[i]` is the group containing basis index `i`.
    pub fn group_of(&self) -> Vec<usize> {
        let mut g = vec![0; self.s_dim()];
        for (a, members) in self.groups.iter().enumerate() {
            for &i in members {
                g[i] = a;
            }
        }
        g
    }

    /// Standard-basis projector onto group `a`.
    pub fn basis_projector(&self, s_dims: &[usize], a: usize) -> Operator {
        let mut p = Operator::zeros(s_dims.to_vec()).into_matrix();
        for &i in &self.groups[a] {
            p[(i, i)] = ONE;
        }
        Operator::new(s_dims.to_vec(), p).expect("dims match")
    }
}

#[derive(Debug, Clone)]
pub struct TimeSpec {
    pub basis: Operator,
    pub partition: RankPartition,
    /// Extra unitary applied after `basis` when the earlier outcomes equal the key.
    pub branch_map: BTreeMap<Vec<usize>, Operator>,
}

impl TimeSpec {
    pub fn new(basis: Operator, partition: RankPartition) -> Self {
        Self { basis, partition, branch_map: BTreeMap::new() }
    }
}

/// Parameterized projector schedule on S.
#[derive(Debug, Clone)]
pub struct FamilySpec {
    s_dims: Vec<usize>,
    times: Vec<TimeSpec>,
}

impl FamilySpec {
    pub fn new(s_dims: Vec<usize>, times: Vec<TimeSpec>) -> Result<Self> {
        let s_dim: usize = s_dims.iter().product();
        let check_unitary = |u: &Operator, what: &str| -> Result<()> {
            if u.dims() != s_dims.as_slice() {
                return Err(Error::DimensionMismatch {
                    expected: format!("{what} on {s_dims:?}"),
                    found: format!("{:?}", u.dims()),
                });
            }
            let dev = u.adjoint().mul(u)?.max_abs_diff(&Operator::identity(s_dims.clone()));
            if dev > 1e-10 {
                return Err(Error::InvalidFamily(format!("{what} is not unitary (deviation {dev:e})")));
            }
            Ok(())
        };
        for (j, t) in times.iter().enumerate() {
            check_unitary(&t.basis, &format!("basis unitary at time {j}"))?;
            if t.partition.s_dim() != s_dim {
                return Err(Error::DimensionMismatch {
                    expected: format!("partition over {s_dim} basis states at time {j}"),
                    found: format!("{}", t.partition.s_dim()),
                });
            }
            // Re-validate in case the partition was deserialized.
            RankPartition::new(t.partition.groups.clone(), s_dim)?;
            for (prefix, u) in &t.branch_map {
                validate_prefix(&times, j, prefix)?;
                check_unitary(u, &format!("branch unitary at time {j} for prefix {prefix:?}"))?;
            }
        }
        Ok(Self { s_dims, times })
    }

    /// Branch-independent family with the same partition at every time.
    pub fn uniform(s_dims: Vec<usize>, bases: Vec<Operator>, partition: RankPartition) -> Result<Self> {
        let times = bases.into_iter().map(|b| TimeSpec::new(b, partition.clone())).collect();
        Self::new(s_dims, times)
    }

    pub fn s_dims(&self) -> &[usize] {
        &self.s_dims
    }

    pub fn times(&self) -> &[TimeSpec] {
        &self.times
    }

    pub fn k(&self) -> usize {
        self.times.len()
    }

    /// `m_j` for every time.
    pub fn ancilla_dims(&self) -> Vec<usize> {
        self.times.iter().map(|t| t.partition.len()).collect()
    }

    pub fn history_count(&self) -> usize {
        self.ancilla_dims().iter().product()
    }

    /// All labels in lexicographic order (first time most significant).
    pub fn labels(&self) -> Vec<HistoryLabel> {
        enumerate_labels(&self.ancilla_dims())
    }

    /// Basis change at time `j` after the earlier outcomes `prefix`.
    pub fn effective_basis(&self, j: usize, prefix: &[usize]) -> Result<Operator> {
        validate_prefix(&self.times, j, prefix)?;
        let t = &self.times[j];
        match t.branch_map.get(prefix) {
            Some(extra) => extra.mul(&t.basis),
            None => Ok(t.basis.clone()),
        }
    }
}

fn validate_prefix(times: &[TimeSpec], j: usize, prefix: &[usize]) -> Result<()> {
    if j >= times.len() {
        return Err(Error::InvalidFamily(format!("time {j} out of range ({} times)", times.len())));
    }
    if prefix.len() != j {
        return Err(Error::InvalidFamily(format!("prefix {prefix:?} must have length {j}")));
    }
    for (i, &a) in prefix.iter().enumerate() {
        if a >= times[i].partition.len() {
            return Err(Error::InvalidFamily(format!("prefix {prefix:?}: outcome {a} out of range at time {i}")));
        }
    }
    Ok(())
}

/// Outcome sequence `(alpha_1, ..., alpha_k)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HistoryLabel(pub Vec<usize>);

impl HistoryLabel {
    pub fn outcomes(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, ancilla_dims: &[usize]) -> Result<()> {
        if self.0.len() != ancilla_dims.len() {
            return Err(Error::InvalidLabel(format!(
                "label {self} has {} outcomes, family has {} times",
                self.0.len(),
                ancilla_dims.len()
            )));
        }
        for (j, (&a, &m)) in self.0.iter().zip(ancilla_dims).enumerate() {
            if a >= m {
                return Err(Error::InvalidLabel(format!("label {self}: outcome {a} >= {m} at time {j}")));
            }
        }
        Ok(())
    }

    /// Row/column index in lexicographic label order.
    pub fn index(&self, ancilla_dims: &[usize]) -> Result<usize> {
        self.validate(ancilla_dims)?;
        Ok(self.0.iter().zip(ancilla_dims).fold(0, |acc, (&a, &m)| acc * m + a))
    }

    pub fn from_index(mut index: usize, ancilla_dims: &[usize]) -> Self {
        let mut out = vec![0; ancilla_dims.len()];
        for j in (0..ancilla_dims.len()).rev() {
            out[j] = index % ancilla_dims[j];
            index /= ancilla_dims[j];
        }
        Self(out)
    }

    /// Parses an outcome string such as `"01"`; outcomes are single digits,
    /// or comma separated when any `m_j` exceeds 10 (`"3,11"`).
    pub fn parse(s: &str, ancilla_dims: &[usize]) -> Result<Self> {
        let s = s.trim();
        let outcomes: Option<Vec<usize>> = if s.contains(',') {
            s.split(',').map(|t| t.trim().parse().ok()).collect()
        } else {
            s.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect()
        };
        let label = Self(outcomes.ok_or_else(|| Error::InvalidLabel(format!("cannot parse {s:?}")))?);
        label.validate(ancilla_dims)?;
        Ok(label)
    }
}

impl fmt::Display for HistoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wide = self.0.iter().any(|&a| a >= 10);
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        f.write_str(&parts.join(if wide { "," } else { "" }))
    }
}

pub fn enumerate_labels(ancilla_dims: &[usize]) -> Vec<HistoryLabel> {
    let n: usize = ancilla_dims.iter().product();
    (0..n).map(|i| HistoryLabel::from_index(i, ancilla_dims)).collect()
}

/// `B (sum of basis projectors in group a) B^dagger`, with `B` the
/// effective basis at time `j` after `prefix`.
pub fn projector(family: &FamilySpec, j: usize, prefix: &[usize], a: usize) -> Result<Operator> {
    let b = family.effective_basis(j, prefix)?;
    let part = &family.times[j].partition;
    if a >= part.len() {
        return Err(Error::InvalidLabel(format!("outcome {a} out of range at time {j}")));
    }
    b.conjugate(&part.basis_projector(&family.s_dims, a))
}

fn extend_by_identity(p: &Operator, e_dims: &[usize]) -> Operator {
    if e_dims.is_empty() {
        p.clone()
    } else {
        tensor(p, &Operator::identity(e_dims.to_vec()))
    }
}

fn check_compatible(model: &ModelSpec, family: &FamilySpec) -> Result<()> {
    if model.s_dims() != family.s_dims() {
        return Err(Error::DimensionMismatch {
            expected: format!("family on S = {:?}", model.s_dims()),
            found: format!("{:?}", family.s_dims()),
        });
    }
    if model.k() != family.k() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} projection times", model.k()),
            found: format!("{}", family.k()),
        });
    }
    Ok(())
}

/// Time-ordered product of Heisenberg projectors for one history, built as a
/// forward Schrödinger sweep `P_k U_k ... P_1 U_1` on `S (x) E`.
pub fn class_operator(model: &ModelSpec, family: &FamilySpec, label: &HistoryLabel) -> Result<Operator> {
    check_compatible(model, family)?;
    label.validate(&family.ancilla_dims())?;
    let mut c = Operator::identity(model.se_dims());
    for (j, u) in model.unitaries().iter().enumerate() {
        let p = projector(family, j, &label.0[..j], label.0[j])?;
        c = extend_by_identity(&p, model.e_dims()).mul(&u.mul(&c)?)?;
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceMode {
    Full,
    Partial,
}

#[derive(Debug, Clone)]
pub enum DecoherenceEntries {
    Full(DMatrix<C64>),
    /// Row-major `n x n` grid of S-operator blocks.
    Partial(Vec<Operator>),
}

#[derive(Debug, Clone)]
pub struct DecoherenceMatrix {
    labels: Vec<HistoryLabel>,
    entries: DecoherenceEntries,
}

impl DecoherenceMatrix {
    pub fn from_full(labels: Vec<HistoryLabel>, d: DMatrix<C64>) -> Result<Self> {
        if d.nrows() != labels.len() || d.ncols() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", labels.len()),
                found: format!("{}x{}", d.nrows(), d.ncols()),
            });
        }
        Ok(Self { labels, entries: DecoherenceEntries::Full(d) })
    }

    pub fn from_blocks(labels: Vec<HistoryLabel>, blocks: Vec<Operator>) -> Result<Self> {
        if blocks.len() != labels.len() * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} blocks", labels.len() * labels.len()),
                found: format!("{}", blocks.len()),
            });
        }
        Ok(Self { labels, entries: DecoherenceEntries::Partial(blocks) })
    }

    pub fn mode(&self) -> TraceMode {
        match self.entries {
            DecoherenceEntries::Full(_) => TraceMode::Full,
            DecoherenceEntries::Partial(_) => TraceMode::Partial,
        }
    }

    pub fn labels(&self) -> &[HistoryLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn entries(&self) -> &DecoherenceEntries {
        &self.entries
    }

    /// Scalar entry `D(i, j)`; in partial mode the trace of the block.
    pub fn scalar(&self, i: usize, j: usize) -> C64 {
        match &self.entries {
            DecoherenceEntries::Full(d) => d[(i, j)],
            DecoherenceEntries::Partial(b) => b[i * self.len() + j].trace(),
        }
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&Operator> {
        match &self.entries {
            DecoherenceEntries::Full(_) => None,
            DecoherenceEntries::Partial(b) => Some(&b[i * self.len() + j]),
        }
    }

    /// Full-trace matrix; partial blocks are traced over S.
    pub fn to_full(&self) -> Self {
        let n = self.len();
        let d = DMatrix::from_fn(n, n, |i, j| self.scalar(i, j));
        Self { labels: self.labels.clone(), entries: DecoherenceEntries::Full(d) }
    }

    /// Diagonal entries read as history weights.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.scalar(i, i).re).collect()
    }

    /// `sum over i != j` of `|D(i,j)|^2` (full) or `||D_pt(i,j)||_HS^2` (partial).
    pub fn off_diagonal_mass(&self) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += match &self.entries {
                        DecoherenceEntries::Full(d) => d[(i, j)].norm_sqr(),
                        DecoherenceEntries::Partial(b) => b[i * n + j].hs_norm_sq(),
                    };
                }
            }
        }
        acc
    }
}

/// Full- or partial-trace decoherence matrix over every history of the family.
pub fn decoherence_matrix(model: &ModelSpec, family: &FamilySpec, mode: TraceMode) -> Result<DecoherenceMatrix> {
    check_compatible(model, family)?;
    let labels = family.labels();
    let classes = labels
        .iter()
        .map(|l| class_operator(model, family, l).map(Operator::into_matrix))
        .collect::<Result<Vec<_>>>()?;
    let rho = model.rho().matrix();
    let weighted: Vec<DMatrix<C64>> = classes.iter().map(|c| c * rho).collect();
    let n = labels.len();
    let side = rho.nrows();

    match mode {
        TraceMode::Full => {
            // Tr(X C^dagger) = sum_{r,m} X[r,m] conj(C[r,m])
            let d = DMatrix::from_fn(n, n, |a, b| {
                weighted[a].iter().zip(classes[b].iter()).map(|(x, c)| x * c.conj()).sum()
            });
            DecoherenceMatrix::from_full(labels, d)
        }
        TraceMode::Partial => {
            let (ds, de) = (model.s_dim(), model.e_dim());
            let mut blocks = Vec::with_capacity(n * n);
            for a in 0..n {
                for b in 0..n {
                    let (x, c) = (&weighted[a], &classes[b]);
                    let m = DMatrix::from_fn(ds, ds, |s, s2| {
                        let mut acc = ZERO;
                        for e in 0..de {
                            let (r, r2) = (s * de + e, s2 * de + e);
                            for k in 0..side {
                                acc += x[(r, k)] * c[(r2, k)].conj();
                            }
                        }
                        acc
                    });
                    blocks.push(Operator::new(model.s_dims().to_vec(), m)?);
                }
            }
            DecoherenceMatrix::from_blocks(labels, blocks)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsistencyFlavor {
    /// `Re D(a, a') = 0` for `a != a'`.
    RealPart,
    /// `D(a, a') = 0` for `a != a'`.
    Strong,
    /// Every off-diagonal partial-trace block vanishes.
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyCheck {
    pub consistent: bool,
    pub max_violation: f64,
}

pub fn check_consistency(d: &DecoherenceMatrix, tol: f64, flavor: ConsistencyFlavor) -> Result<ConsistencyCheck> {
    let expected = match flavor {
        ConsistencyFlavor::RealPart | ConsistencyFlavor::Strong => TraceMode::Full,
        ConsistencyFlavor::Partial => TraceMode::Partial,
    };
    if d.mode() != expected {
        return Err(Error::ModeMismatch(format!("{flavor:?} consistency needs a {expected:?} matrix")));
    }
    let n = d.len();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = match flavor {
                ConsistencyFlavor::RealPart => d.scalar(i, j).re.abs(),
                ConsistencyFlavor::Strong => d.scalar(i, j).norm(),
                ConsistencyFlavor::Partial => d.block(i, j).map(|b| b.hs_norm_sq().sqrt()).unwrap_or(0.0),
            };
            worst = worst.max(v);
        }
    }
    Ok(ConsistencyCheck { consistent: worst <= tol, max_violation: worst })
}

/// `eps(a, a') = |D(a,a')| / sqrt(D(a,a) D(a',a'))`; `None` on the diagonal
/// and where either history has zero probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseEpsilon {
    n: usize,
    values: Vec<Option<f64>>,
}

impl PairwiseEpsilon {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Largest defined value, 0 if none.
    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Off-diagonal pairs whose epsilon is undefined.
    pub fn undefined_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.get(i, j).is_none() {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub fn pairwise_epsilon(d: &DecoherenceMatrix) -> Result<PairwiseEpsilon> {
    if d.mode() != TraceMode::Full {
        return Err(Error::ModeMismatch("pairwise epsilon needs a full-trace matrix".into()));
    }
    let n = d.len();
    let p = d.probabilities();
    let mut values = vec![None; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && p[i] >= ZERO_PROBABILITY && p[j] >= ZERO_PROBABILITY {
                values[i * n + j] = Some(d.scalar(i, j).norm() / (p[i] * p[j]).sqrt());
            }
        }
    }
    Ok(PairwiseEpsilon { n, values })
}
