//! Dense complex linear algebra over labeled tensor-product spaces.
//!
//! An [`Operator`] is a square complex matrix together with the ordered list
//! of subsystem dimensions it acts on. Basis indices are composed
//! big-endian: for dims `[d0, d1, d2]` the basis state `(i0, i1, i2)` has
//! index `(i0 * d1 + i1) * d2 + i2`, so the first subsystem is the most
//! significant digit and [`tensor`] is the ordinary Kronecker product.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Absolute entrywise tolerance used for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    mat: DMatrix<C64>,
}

impl Operator {
    pub fn new(dims: Vec<usize>, mat: DMatrix<C64>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if dims.contains(&0) {
            return Err(Error::DimensionMismatch {
                expected: "nonzero subsystem dimensions".into(),
                found: format!("{dims:?}"),
            });
        }
        if mat.nrows() != side || mat.ncols() != side {
            return Err(Error::DimensionMismatch {
                expected: format!("{side}x{side} for dims {dims:?}"),
                found: format!("{}x{}", mat.nrows(), mat.ncols()),
            });
        }
        Ok(Self { dims, mat })
    }

    /// Operator on a single subsystem of dimension `mat.nrows()`.
    pub fn single(mat: DMatrix<C64>) -> Result<Self> {
        let d = mat.nrows();
        Self::new(vec![d], mat)
    }

    /// Build from row-major entries.
    pub fn from_rows(dims: Vec<usize>, rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: format!("square {n}x{n} rows"),
                found: "ragged rows".into(),
            });
        }
        let mat = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
        Self::new(dims, mat)
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let side = dims.iter().product();
        Self { dims, mat: DMatrix::identity(side, side) }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let side = dims.iter().product();
        Self { dims, mat: DMatrix::zeros(side, side) }
    }

    /// Diagonal operator on one subsystem.
    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        Self {
            dims: vec![n],
            mat: DMatrix::from_fn(n, n, |r, c| if r == c { entries[r] } else { ZERO }),
        }
    }

    /// `|psi><psi|` for a (not necessarily normalized) vector.
    pub fn projector_onto(dims: Vec<usize>, psi: &[C64]) -> Result<Self> {
        let n = psi.len();
        let mat = DMatrix::from_fn(n, n, |r, c| psi[r] * psi[c].conj());
        Self::new(dims, mat)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn side(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    /// Same matrix, relabeled subsystem layout.
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.mat)
    }

    pub fn adjoint(&self) -> Self {
        Self { dims: self.dims.clone(), mat: self.mat.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dims: self.dims.clone(), mat: &self.mat * s }
    }

    pub fn mul(&self, rhs: &Operator) -> Result<Self> {
        self.check_same_dims(rhs)?;
        Ok(Self { dims: self.dims.clone(), mat: &self.mat * &rhs.mat })
    }

    pub fn add(&self, rhs: &Operator) -> Result<Self> {
        self.check_same_dims(rhs)?;
        Ok(Self { dims: self.dims.clone(), mat: &self.mat + &rhs.mat })
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Self> {
        self.check_same_dims(rhs)?;
        Ok(Self { dims: self.dims.clone(), mat: &self.mat - &rhs.mat })
    }

    /// `self * rho * self^dagger`.
    pub fn conjugate(&self, rho: &Operator) -> Result<Self> {
        self.check_same_dims(rho)?;
        Ok(Self { dims: self.dims.clone(), mat: &self.mat * &rho.mat * self.mat.adjoint() })
    }

    fn check_same_dims(&self, rhs: &Operator) -> Result<()> {
        if self.dims != rhs.dims {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", self.dims),
                found: format!("{:?}", rhs.dims),
            });
        }
        Ok(())
    }

    /// Largest entrywise deviation `|m_ij - conj(m_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.side();
        let mut dev = 0.0_f64;
        for r in 0..n {
            for c in r..n {
                dev = dev.max((self.mat[(r, c)] - self.mat[(c, r)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Hermitian, positive semidefinite and unit trace within `tol`.
    pub fn is_density(&self, tol: f64) -> bool {
        self.is_hermitian(tol)
            && (self.trace() - ONE).norm() <= tol
            && self.min_eigenvalue() >= -tol
    }

    /// Checks the density-matrix predicates, reporting which one failed.
    pub fn validate_density(&self, tol: f64) -> Result<()> {
        let dev = self.hermitian_deviation();
        if dev > tol {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `Tr(M^dagger M)`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Tr(M^2)`, real part. Equals the purity for Hermitian inputs.
    pub fn purity(&self) -> f64 {
        let n = self.side();
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += (self.mat[(r, c)] * self.mat[(c, r)]).re;
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Positions into an operator's subsystem list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemSelector {
    indices: Vec<usize>,
}

impl SubsystemSelector {
    pub fn new(indices: Vec<usize>, subsystem_count: usize) -> Result<Self> {
        let mut seen = vec![false; subsystem_count];
        for &i in &indices {
            if i >= subsystem_count {
                return Err(Error::SelectorOutOfRange { index: i, count: subsystem_count });
            }
            if seen[i] {
                return Err(Error::DuplicateSelector(i));
            }
            seen[i] = true;
        }
        Ok(Self { indices })
    }

    /// Selects `range` without bounds checking; validated when used.
    pub fn range(range: std::ops::Range<usize>) -> Self {
        Self { indices: range.collect() }
    }

    pub fn all(subsystem_count: usize) -> Self {
        Self::range(0..subsystem_count)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    fn validate(&self, subsystem_count: usize) -> Result<()> {
        Self::new(self.indices.clone(), subsystem_count).map(|_| ())
    }

    fn mask(&self, subsystem_count: usize) -> Vec<bool> {
        let mut m = vec![false; subsystem_count];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    pub fn covers_all(&self, subsystem_count: usize) -> bool {
        self.mask(subsystem_count).iter().all(|&b| b)
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// For every full basis index, the index within the sub-register selected
/// by `mask` (digits of unselected subsystems dropped).
fn sub_register_codes(dims: &[usize], mask: &[bool]) -> Vec<usize> {
    let side: usize = dims.iter().product();
    let st = strides(dims);
    let mut codes = Vec::with_capacity(side);
    for idx in 0..side {
        let mut code = 0;
        for (i, &d) in dims.iter().enumerate() {
            if mask[i] {
                code = code * d + (idx / st[i]) % d;
            }
        }
        codes.push(code);
    }
    codes
}

/// Kronecker product; subsystem lists are concatenated.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let (na, nb) = (a.side(), b.side());
    let mat = DMatrix::from_fn(na * nb, na * nb, |r, c| {
        a.mat[(r / nb, c / nb)] * b.mat[(r % nb, c % nb)]
    });
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    Operator { dims, mat }
}

pub fn tensor_all<'a>(ops: impl IntoIterator<Item = &'a Operator>) -> Operator {
    ops.into_iter()
        .fold(None, |acc: Option<Operator>, op| match acc {
            None => Some(op.clone()),
            Some(a) => Some(tensor(&a, op)),
        })
        .unwrap_or_else(|| Operator::identity(vec![]))
}

/// `exp(-i h dt)` for Hermitian `h`, via eigendecomposition.
pub fn evolve_unitary(h: &Operator, dt: f64) -> Result<Operator> {
    let dev = h.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { max_dev: dev });
    }
    let herm = (&h.mat + h.mat.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| {
        if r == c {
            C64::from_polar(1.0, -eig.eigenvalues[r] * dt)
        } else {
            ZERO
        }
    });
    let mat = v * phases * v.adjoint();
    Ok(Operator { dims: h.dims.clone(), mat })
}

/// Traces out the selected subsystems.
pub fn partial_trace(m: &Operator, discard: &SubsystemSelector) -> Result<Operator> {
    let n = m.dims.len();
    discard.validate(n)?;
    let mask = discard.mask(n);
    let keep_dims: Vec<usize> = (0..n).filter(|&i| !mask[i]).map(|i| m.dims[i]).collect();
    let st = strides(&m.dims);

    // offsets[k] = full index contribution of kept multi-index k; likewise for discarded.
    let offsets = |select: bool| -> Vec<usize> {
        let sub: Vec<usize> = (0..n).filter(|&i| mask[i] == select).collect();
        let count: usize = sub.iter().map(|&i| m.dims[i]).product();
        (0..count)
            .map(|mut code| {
                let mut off = 0;
                for &i in sub.iter().rev() {
                    off += (code % m.dims[i]) * st[i];
                    code /= m.dims[i];
                }
                off
            })
            .collect()
    };
    let keep_off = offsets(false);
    let disc_off = offsets(true);

    let k = keep_off.len();
    let mat = DMatrix::from_fn(k, k, |r, c| {
        let (ro, co) = (keep_off[r], keep_off[c]);
        disc_off.iter().map(|&d| m.mat[(ro + d, co + d)]).sum()
    });
    Ok(Operator { dims: keep_dims, mat })
}

/// Zeroes every entry whose row and column differ on the selected subsystems.
pub fn dephase(m: &Operator, on: &SubsystemSelector) -> Result<Operator> {
    let n = m.dims.len();
    on.validate(n)?;
    let codes = sub_register_codes(&m.dims, &on.mask(n));
    let side = m.side();
    let mat = DMatrix::from_fn(side, side, |r, c| {
        if codes[r] == codes[c] {
            m.mat[(r, c)]
        } else {
            ZERO
        }
    });
    Ok(Operator { dims: m.dims.clone(), mat })
}

/// Diagonal blocks of `m` with respect to the selected subsystems: entry
/// `a` is the operator on the complement obtained by fixing the selected
/// digits of both row and column to `a`.
pub fn diagonal_blocks(m: &Operator, on: &SubsystemSelector) -> Result<Vec<Operator>> {
    let n = m.dims.len();
    on.validate(n)?;
    let mask = on.mask(n);
    let sel_codes = sub_register_codes(&m.dims, &mask);
    let inv: Vec<bool> = mask.iter().map(|b| !b).collect();
    let rest_codes = sub_register_codes(&m.dims, &inv);
    let sel_count: usize = (0..n).filter(|&i| mask[i]).map(|i| m.dims[i]).product();
    let rest_dims: Vec<usize> = (0..n).filter(|&i| !mask[i]).map(|i| m.dims[i]).collect();
    let rest_side: usize = rest_dims.iter().product();

    let mut members: Vec<Vec<usize>> = vec![Vec::with_capacity(rest_side); sel_count];
    for idx in 0..m.side() {
        members[sel_codes[idx]].push(idx);
    }
    Ok(members
        .iter()
        .map(|idxs| {
            let mut mat = DMatrix::zeros(rest_side, rest_side);
            for &r in idxs {
                for &c in idxs {
                    mat[(rest_codes[r], rest_codes[c])] = m.mat[(r, c)];
                }
            }
            Operator { dims: rest_dims.clone(), mat }
        })
        .collect())
}

/// `Tr((a - b)^dagger (a - b))`.
pub fn hs_distance_sq(a: &Operator, b: &Operator) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", a.dims),
            found: format!("{:?}", b.dims),
        });
    }
    Ok(a.mat.iter().zip(b.mat.iter()).map(|(x, y)| (x - y).norm_sqr()).sum())
}

/// Common single-qubit gates and states.
pub mod gates {
    use super::*;

    fn q(rows: [[C64; 2]; 2]) -> Operator {
        Operator::single(DMatrix::from_fn(2, 2, |r, c| rows[r][c])).expect("2x2")
    }

    pub fn pauli_x() -> Operator {
        q([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn pauli_y() -> Operator {
        q([[ZERO, -I], [I, ZERO]])
    }

    pub fn pauli_z() -> Operator {
        q([[ONE, ZERO], [ZERO, -ONE]])
    }

    pub fn hadamard() -> Operator {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        q([[s, s], [s, -s]])
    }

    /// `exp(-i angle X / 2)`.
    pub fn rx(angle: f64) -> Operator {
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        q([[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]])
    }

    /// `exp(-i angle Y / 2)`.
    pub fn ry(angle: f64) -> Operator {
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        q([[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]])
    }

    /// `exp(-i angle Z / 2)`.
    pub fn rz(angle: f64) -> Operator {
        q([
            [C64::from_polar(1.0, -angle / 2.0), ZERO],
            [ZERO, C64::from_polar(1.0, angle / 2.0)],
        ])
    }

    /// CNOT with the first qubit as control.
    pub fn cnot() -> Operator {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        Operator::new(vec![2, 2], m).expect("4x4")
    }

    pub fn plus() -> [C64; 2] {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [s, s]
    }

    pub fn minus() -> [C64; 2] {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [s, -s]
    }

    pub fn basis(dim: usize, index: usize) -> Vec<C64> {
        (0..dim).map(|i| if i == index { ONE } else { ZERO }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::gates::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_op(rng: &mut impl Rng, dims: Vec<usize>) -> Operator {
        let n = dims.iter().product();
        let mat = DMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        Operator::new(dims, mat).unwrap()
    }

    fn random_hermitian(rng: &mut impl Rng, dims: Vec<usize>) -> Operator {
        let a = random_op(rng, dims);
        a.add(&a.adjoint()).unwrap()
    }

    fn random_density(rng: &mut impl Rng, dims: Vec<usize>) -> Operator {
        let a = random_op(rng, dims);
        let m = a.mul(&a.adjoint()).unwrap();
        let tr = m.trace();
        m.scale(tr.inv())
    }

    #[test]
    fn tensor_identity_and_projectors() {
        let i2 = Operator::identity(vec![2]);
        let i4 = tensor(&i2, &i2);
        assert_eq!(i4.dims(), &[2, 2]);
        assert_eq!(i4.matrix(), &DMatrix::<C64>::identity(4, 4));

        let p0 = Operator::diag(&[ONE, ZERO]);
        let p1 = Operator::diag(&[ZERO, ONE]);
        let t = tensor(&p0, &p1);
        let expect = Operator::new(vec![2, 2], Operator::diag(&[ZERO, ONE, ZERO, ZERO]).into_matrix()).unwrap();
        assert_eq!(t, expect);
    }

    #[test]
    fn tensor_index_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_op(&mut rng, vec![2]);
        let b = random_op(&mut rng, vec![2]);
        let t = tensor(&a, &b);
        assert_eq!(t.get(2, 3), a.get(1, 1) * b.get(0, 1));
        for r in 0..4 {
            for col in 0..4 {
                assert_eq!(t.get(r, col), a.get(r / 2, col / 2) * b.get(r % 2, col % 2));
            }
        }
    }

    #[test]
    fn evolve_diagonal_and_zero() {
        let u = evolve_unitary(&pauli_z(), PI / 2.0).unwrap();
        assert!((u.get(0, 0) - c(0.0, -1.0)).norm() < 1e-15);
        assert!((u.get(1, 1) - c(0.0, 1.0)).norm() < 1e-15);
        assert!(u.get(0, 1).norm() < 1e-15);

        let z = evolve_unitary(&Operator::zeros(vec![3]), 1.3).unwrap();
        assert!(z.max_abs_diff(&Operator::identity(vec![3])) < 1e-15);
    }

    #[test]
    fn evolve_matches_taylor_series() {
        // 30-term Taylor sum of exp(-i h dt).
        let h = pauli_x();
        let dt = 0.7;
        let gen = h.matrix() * c(0.0, -dt);
        let mut term = DMatrix::<C64>::identity(2, 2);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &gen / c(k as f64, 0.0);
            sum += &term;
        }
        let u = evolve_unitary(&h, dt).unwrap();
        let diff = (u.matrix() - &sum).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn evolve_rejects_non_hermitian() {
        let m = Operator::from_rows(vec![2], &[vec![ZERO, ONE], vec![ZERO, ZERO]]).unwrap();
        assert!(matches!(evolve_unitary(&m, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn partial_trace_bell_and_product() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = Operator::projector_onto(vec![2, 2], &[c(s, 0.0), ZERO, ZERO, c(s, 0.0)]).unwrap();
        let r = partial_trace(&bell, &SubsystemSelector::new(vec![1], 2).unwrap()).unwrap();
        assert!(r.max_abs_diff(&Operator::identity(vec![2]).scale(c(0.5, 0.0))) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_op(&mut rng, vec![2]);
        let sigma = random_op(&mut rng, vec![3]);
        let prod = tensor(&rho, &sigma);
        let r = partial_trace(&prod, &SubsystemSelector::new(vec![1], 2).unwrap()).unwrap();
        assert!(r.max_abs_diff(&rho.scale(sigma.trace())) < 1e-13);
        // and the other way round
        let r = partial_trace(&prod, &SubsystemSelector::new(vec![0], 2).unwrap()).unwrap();
        assert!(r.max_abs_diff(&sigma.scale(rho.trace())) < 1e-13);
    }

    #[test]
    fn partial_trace_middle_subsystem_matches_index_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_op(&mut rng, vec![2, 3, 2]);
        let r = partial_trace(&m, &SubsystemSelector::new(vec![1], 3).unwrap()).unwrap();
        assert_eq!(r.dims(), &[2, 2]);
        for (a, b, a2, b2) in (0..16).map(|x| (x / 8, (x / 4) % 2, (x / 2) % 2, x % 2)) {
            let mut want = ZERO;
            for e in 0..3 {
                want += m.get(a * 6 + e * 2 + b, a2 * 6 + e * 2 + b2);
            }
            assert!((r.get(a * 2 + b, a2 * 2 + b2) - want).norm() < 1e-14);
        }
    }

    #[test]
    fn partial_trace_selector_errors() {
        let m = Operator::identity(vec![2, 2]);
        assert!(matches!(
            partial_trace(&m, &SubsystemSelector::range(1..3)),
            Err(Error::SelectorOutOfRange { index: 2, count: 2 })
        ));
        assert!(matches!(SubsystemSelector::new(vec![0, 0], 2), Err(Error::DuplicateSelector(0))));
    }

    #[test]
    fn dephase_examples() {
        let plus = Operator::projector_onto(vec![2], &gates::plus()).unwrap();
        let d = dephase(&plus, &SubsystemSelector::all(1)).unwrap();
        assert!(d.max_abs_diff(&Operator::identity(vec![2]).scale(c(0.5, 0.0))) < 1e-15);

        let diag = Operator::diag(&[c(0.2, 0.0), c(0.3, 0.0), c(0.5, 0.0)]);
        assert_eq!(dephase(&diag, &SubsystemSelector::all(1)).unwrap(), diag);
    }

    #[test]
    fn dephase_second_qubit_masks_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sigma = random_density(&mut rng, vec![2, 2]);
        let d = dephase(&sigma, &SubsystemSelector::new(vec![1], 2).unwrap()).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let want = if r % 2 == col % 2 { sigma.get(r, col) } else { ZERO };
                assert_eq!(d.get(r, col), want);
            }
        }
    }

    #[test]
    fn diagonal_blocks_reassemble_dephased() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sigma = random_density(&mut rng, vec![2, 3]);
        let on = SubsystemSelector::new(vec![1], 2).unwrap();
        let blocks = diagonal_blocks(&sigma, &on).unwrap();
        assert_eq!(blocks.len(), 3);
        let total: f64 = blocks.iter().map(|b| b.purity()).sum();
        let deph = dephase(&sigma, &on).unwrap();
        assert!((total - deph.purity()).abs() < 1e-14);
        assert!((blocks[1].get(0, 1) - sigma.get(1, 4)).norm() < 1e-15);
    }

    #[test]
    fn hs_distance_examples() {
        let a = Operator::diag(&[ONE, ZERO]);
        let b = Operator::diag(&[ZERO, ONE]);
        assert_eq!(hs_distance_sq(&a, &a).unwrap(), 0.0);
        assert_eq!(hs_distance_sq(&a, &b).unwrap(), 2.0);
        assert!(hs_distance_sq(&a, &Operator::identity(vec![3])).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_op(&mut rng, vec![3]);
        let y = random_op(&mut rng, vec![3]);
        let mut want = 0.0;
        for r in 0..3 {
            for col in 0..3 {
                want += (x.get(r, col) - y.get(r, col)).norm_sqr();
            }
        }
        assert!((hs_distance_sq(&x, &y).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn gates_are_consistent_with_exponentials() {
        let u = evolve_unitary(&pauli_x(), 0.35).unwrap();
        assert!(u.max_abs_diff(&rx(0.7)) < 1e-14);
        let u = evolve_unitary(&pauli_y(), 0.35).unwrap();
        assert!(u.max_abs_diff(&ry(0.7)) < 1e-14);
        let u = evolve_unitary(&pauli_z(), 0.35).unwrap();
        assert!(u.max_abs_diff(&rz(0.7)) < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn evolve_is_unitary(seed in any::<u64>(), dt in -10.0f64..10.0, n in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(&mut rng, vec![n]);
            let u = evolve_unitary(&h, dt).unwrap();
            let uu = u.adjoint().mul(&u).unwrap();
            prop_assert!(hs_distance_sq(&uu, &Operator::identity(vec![n])).unwrap().sqrt() < 1e-12);
        }

        #[test]
        fn partial_trace_preserves_trace_and_positivity(seed in any::<u64>(), which in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&mut rng, vec![2, 2, 2]);
            let r = partial_trace(&rho, &SubsystemSelector::new(vec![which], 3).unwrap()).unwrap();
            prop_assert!((r.trace() - rho.trace()).norm() < 1e-13);
            prop_assert!(r.min_eigenvalue() >= -1e-12);

            let h = random_hermitian(&mut rng, vec![2, 2, 2]);
            let r = partial_trace(&h, &SubsystemSelector::new(vec![which, (which + 1) % 3], 3).unwrap()).unwrap();
            prop_assert!((r.trace() - h.trace()).norm() < 1e-12);
        }

        #[test]
        fn dephase_idempotent_trace_and_psd(seed in any::<u64>(), mask in 1u8..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&mut rng, vec![2, 3, 2]);
            let idx: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
            let on = SubsystemSelector::new(idx, 3).unwrap();
            let once = dephase(&rho, &on).unwrap();
            let twice = dephase(&once, &on).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!((once.trace() - rho.trace()).norm() < 1e-13);
            prop_assert!(once.min_eigenvalue() >= -1e-12);

            // HS distance to the dephased version equals the mass of the zeroed entries.
            let mut zeroed = 0.0;
            for r in 0..rho.side() {
                for col in 0..rho.side() {
                    if once.get(r, col) == ZERO && rho.get(r, col) != ZERO {
                        zeroed += rho.get(r, col).norm_sqr();
                    }
                }
            }
            prop_assert!((hs_distance_sq(&rho, &once).unwrap() - zeroed).abs() < 1e-13);
        }
    }
}
