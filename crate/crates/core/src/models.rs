//! Built-in models: a spin precessing in a field, a chiral molecule hit by
//! environment collisions, and seeded random models for fuzzing.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histories::{FamilySpec, ModelSpec, RankPartition, Segment, TimeSpec};
use crate::qmath::{evolve_unitary, gates, tensor, tensor_all, Operator, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinFieldConfig {
    pub gamma_b_dt: f64,
    pub k: usize,
}

impl Default for SpinFieldConfig {
    fn default() -> Self {
        Self { gamma_b_dt: 2.0, k: 2 }
    }
}

/// One qubit starting in `|+>`; each segment is `exp(-i gamma_b_dt sigma_z / 2)`,
/// advancing the azimuth of `|+>` by `+gamma_b_dt`.
pub fn spin_field_model(cfg: &SpinFieldConfig) -> Result<ModelSpec> {
    if cfg.k == 0 {
        return Err(Error::InvalidModel("spin-field model needs k >= 1".into()));
    }
    let rho = Operator::projector_onto(vec![2], &gates::plus())?;
    let h = gates::pauli_z().scale(C64::new(0.5, 0.0));
    let seg = Segment::Hamiltonian { h, dt: cfg.gamma_b_dt };
    ModelSpec::new(rho, vec![seg; cfg.k], vec![2], vec![])
}

/// Basis whose columns are `(|0> ± e^{i phi}|1>)/sqrt 2`, the projectors on the
/// `(cos phi, sin phi, 0)` Bloch axis.
pub fn azimuth_basis(phi: f64) -> Operator {
    let h = 0.5f64.sqrt();
    let e = C64::from_polar(h, phi);
    Operator::from_rows(vec![2], &[vec![C64::new(h, 0.0), C64::new(h, 0.0)], vec![e, -e]]).expect("2x2")
}

/// Basis whose first column is the Bloch vector at polar `theta`, azimuth `phi`.
pub fn bloch_basis(theta: f64, phi: f64) -> Operator {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let e = C64::from_polar(1.0, phi);
    Operator::from_rows(vec![2], &[vec![C64::new(c, 0.0), C64::new(s, 0.0)], vec![e * s, -e * c]]).expect("2x2")
}

/// Polar and azimuthal angle of a (not necessarily normalized) axis.
pub fn axis_angles(axis: [f64; 3]) -> Result<(f64, f64)> {
    let r = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidFamily(format!("axis {axis:?} has no direction")));
    }
    Ok(((axis[2] / r).clamp(-1.0, 1.0).acos(), axis[1].atan2(axis[0])))
}

/// Fine qubit family with azimuthal projectors, one angle per time.
pub fn azimuth_family(phis: &[f64]) -> Result<FamilySpec> {
    FamilySpec::uniform(vec![2], phis.iter().map(|&p| azimuth_basis(p)).collect(), RankPartition::fine(2))
}

pub fn spin_field_family(phi1: f64, phi2: f64) -> Result<FamilySpec> {
    azimuth_family(&[phi1, phi2])
}

/// Stationary qubit family projecting on `±axis` at each of `k` times.
pub fn axis_family(axis: [f64; 3], k: usize) -> Result<FamilySpec> {
    let (theta, phi) = axis_angles(axis)?;
    FamilySpec::uniform(vec![2], vec![bloch_basis(theta, phi); k], RankPartition::fine(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChiralInitial {
    /// `|0>`, an equal superposition of both chiralities.
    #[default]
    Zero,
    /// `|R> = |+>`
    Right,
    /// `|L> = |->`
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChiralConfig {
    pub theta_z: f64,
    pub theta_x: f64,
    pub collisions: usize,
    pub initial: ChiralInitial,
}

impl Default for ChiralConfig {
    fn default() -> Self {
        Self { theta_z: 0.01, theta_x: 5.0, collisions: 5, initial: ChiralInitial::Zero }
    }
}

/// Chiral molecule S with one fresh environment qubit per collision.
///
/// Interval `j` applies `Rz(theta_z)` on S, then rotates environment qubit `j`
/// by `Rx(+theta_x)` if S is right-handed and `Rx(-theta_x)` if left-handed.
pub fn chiral_model(cfg: &ChiralConfig) -> Result<ModelSpec> {
    let n = cfg.collisions;
    if n == 0 {
        return Err(Error::InvalidModel("chiral model needs at least one collision".into()));
    }
    let psi = match cfg.initial {
        ChiralInitial::Zero => gates::basis(2, 0),
        ChiralInitial::Right => gates::plus().to_vec(),
        ChiralInitial::Left => gates::minus().to_vec(),
    };
    let s_rho = Operator::projector_onto(vec![2], &psi)?;
    let e_rho = Operator::projector_onto(vec![2; n], &gates::basis(1 << n, 0))?;
    let rho = tensor(&s_rho, &e_rho);

    let p_right = Operator::projector_onto(vec![2], &gates::plus())?;
    let p_left = Operator::projector_onto(vec![2], &gates::minus())?;
    let id2 = Operator::identity(vec![2]);
    let rz = tensor(&gates::rz(cfg.theta_z), &Operator::identity(vec![2; n]));
    let mut segments = Vec::with_capacity(n);
    for j in 0..n {
        let mut right = vec![p_right.clone()];
        let mut left = vec![p_left.clone()];
        for e in 0..n {
            right.push(if e == j { gates::rx(cfg.theta_x) } else { id2.clone() });
            left.push(if e == j { gates::rx(-cfg.theta_x) } else { id2.clone() });
        }
        let collide = tensor_all(&right).add(&tensor_all(&left))?;
        segments.push(Segment::Unitary(collide.mul(&rz)?));
    }
    ModelSpec::new(rho, segments, vec![2], vec![2; n])
}

/// Total weight of histories whose outcome changes between consecutive times.
pub fn switch_probability(labels: &[crate::histories::HistoryLabel], probabilities: &[f64]) -> f64 {
    labels
        .iter()
        .zip(probabilities)
        .filter(|(l, _)| l.0.windows(2).any(|w| w[0] != w[1]))
        .map(|(_, p)| p)
        .sum()
}

#[derive(Debug, Clone)]
pub struct SphereMesh {
    pub vertices: Vec<[f64; 3]>,
    pub neighbors: Vec<Vec<usize>>,
}

impl SphereMesh {
    /// Index of the vertex closest to `axis`.
    pub fn nearest(&self, axis: [f64; 3]) -> usize {
        let dist = |v: &[f64; 3]| (0..3).map(|i| (v[i] - axis[i]).powi(2)).sum::<f64>();
        (0..self.vertices.len())
            .min_by(|&a, &b| dist(&self.vertices[a]).total_cmp(&dist(&self.vertices[b])))
            .expect("mesh is nonempty")
    }
}

/// Unit icosphere. With two or more subdivisions the six coordinate axes are
/// vertices (they are edge midpoints after the first split).
pub fn icosphere(subdivisions: usize) -> SphereMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ];
    let normalize = |v: [f64; 3]| {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / r, v[1] / r, v[2] / r]
    };
    let mut vertices: Vec<[f64; 3]> = raw.iter().map(|&v| normalize(v)).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 3]>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push(normalize([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let mut neighbors = vec![Vec::new(); vertices.len()];
    for [a, b, c] in faces {
        for (x, y) in [(a, b), (b, c), (c, a)] {
            neighbors[x].push(y);
            neighbors[y].push(x);
        }
    }
    for n in &mut neighbors {
        n.sort_unstable();
        n.dedup();
    }
    SphereMesh { vertices, neighbors }
}

/// Default mesh for sphere scans: 162 vertices.
pub fn sphere_mesh() -> SphereMesh {
    icosphere(2)
}

/// Bounds for [`random_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomModelDims {
    pub max_s: usize,
    pub max_e: usize,
    pub max_k: usize,
    pub coarse_graining: bool,
    pub branching: bool,
}

impl Default for RandomModelDims {
    fn default() -> Self {
        Self { max_s: 4, max_e: 4, max_k: 3, coarse_graining: true, branching: true }
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> Operator {
    let n: usize = dims.iter().product();
    let g = DMatrix::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let h = (&g + g.adjoint()).scale(0.5);
    Operator::new(dims, h).expect("dims")
}

fn random_unitary(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> Operator {
    let h = random_hermitian(rng, dims);
    evolve_unitary(&h, 1.0).expect("hermitian by construction")
}

fn random_dims(rng: &mut ChaCha8Rng, max: usize, allow_empty: bool) -> Vec<usize> {
    let mut choices: Vec<Vec<usize>> = Vec::new();
    if allow_empty {
        choices.push(vec![]);
    }
    for d in 2..=max {
        choices.push(vec![d]);
    }
    if max >= 4 {
        choices.push(vec![2, 2]);
    }
    if choices.is_empty() {
        return vec![];
    }
    choices[rng.random_range(0..choices.len())].clone()
}

fn random_partition(rng: &mut ChaCha8Rng, s_dim: usize, coarse: bool) -> RankPartition {
    if !coarse || rng.random_bool(0.5) {
        return RankPartition::fine(s_dim);
    }
    let m = rng.random_range(1..=s_dim);
    // every group gets one index, the rest land at random
    let mut order: Vec<usize> = (0..s_dim).collect();
    for i in (1..s_dim).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut groups: Vec<Vec<usize>> = (0..m).map(|g| vec![order[g]]).collect();
    for &i in &order[m..] {
        let g = rng.random_range(0..m);
        groups[g].push(i);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    RankPartition::new(groups, s_dim).expect("partition by construction")
}

/// Seeded random model and family: random Hermitian generators, a pure or
/// mixed initial state, random projector bases, and (when enabled) random
/// coarse-grained partitions and branch-dependent bases.
pub fn random_model(bounds: RandomModelDims, seed: u64) -> (ModelSpec, FamilySpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s_dims = random_dims(&mut rng, bounds.max_s.max(2), false);
    let e_dims = random_dims(&mut rng, bounds.max_e, true);
    let k = rng.random_range(1..=bounds.max_k.max(1));
    let se_dims: Vec<usize> = s_dims.iter().chain(e_dims.iter()).copied().collect();
    let n: usize = se_dims.iter().product();

    let rank = if rng.random_bool(0.35) { 1 } else { rng.random_range(1..=n) };
    let g = DMatrix::from_fn(n, rank, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let mut rho = &g * g.adjoint();
    let tr = rho.trace();
    rho /= tr;
    let rho = Operator::new(se_dims.clone(), rho).expect("dims");

    let segments = (0..k)
        .map(|_| Segment::Hamiltonian { h: random_hermitian(&mut rng, se_dims.clone()), dt: rng.random_range(0.1..2.0) })
        .collect();
    let model = ModelSpec::new(rho, segments, s_dims.clone(), e_dims).expect("valid random model");

    let s_dim: usize = s_dims.iter().product();
    let mut times: Vec<TimeSpec> = Vec::with_capacity(k);
    for j in 0..k {
        let t = TimeSpec::new(random_unitary(&mut rng, s_dims.clone()), random_partition(&mut rng, s_dim, bounds.coarse_graining));
        times.push(t);
        if bounds.branching && j > 0 && rng.random_bool(0.5) {
            let dims: Vec<usize> = times[..j].iter().map(|t| t.partition.len()).collect();
            for prefix in crate::histories::enumerate_labels(&dims) {
                if rng.random_bool(0.6) {
                    let u = random_unitary(&mut rng, s_dims.clone());
                    times[j].branch_map.insert(prefix.0, u);
                }
            }
        }
    }
    let family = FamilySpec::new(s_dims, times).expect("valid random family");
    (model, family)
}
