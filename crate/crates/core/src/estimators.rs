//! Purity primitives and matrix-element readout, exact or shot-sampled.
//!
//! Sampled estimates simulate the per-shot outcomes of two-copy tests: `±1`
//! swap-test parities, DIP match indicators and the three-valued PDIP
//! statistic. Shot counts are drawn from their exact binomial laws, which is
//! equivalent to drawing the shots one by one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::branchstate::BranchedState;
use crate::error::{Error, Result};
use crate::histories::HistoryLabel;
use crate::qmath::{dephase, diagonal_blocks, Operator, SubsystemSelector};

/// Tolerance for the state checks performed before estimation.
pub const ESTIMATOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shots {
    Exact,
    Finite(u64),
}

impl Shots {
    pub fn is_exact(self) -> bool {
        matches!(self, Shots::Exact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotPlan {
    pub shots: Shots,
    pub seed: u64,
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl ShotPlan {
    pub fn exact() -> Self {
        Self { shots: Shots::Exact, seed: 0 }
    }

    pub fn sampled(shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidConfig("shot count must be at least 1".into()));
        }
        Ok(Self { shots: Shots::Finite(shots), seed })
    }

    pub fn is_exact(&self) -> bool {
        self.shots.is_exact()
    }

    /// Child plan for a named call site.
    pub fn derive(&self, tag: &str) -> Self {
        // FNV-1a over the tag, then mixed with the parent seed
        let h = tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        Self { shots: self.shots, seed: mix64(self.seed ^ mix64(h)) }
    }

    /// Child plan for the `index`-th task of a batch.
    pub fn derive_index(&self, index: u64) -> Self {
        Self { shots: self.shots, seed: mix64(self.seed.wrapping_add(mix64(index ^ 0x5851_f42d_4c95_7f2d))) }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Swap,
    Dip,
    Pdip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityEstimate {
    pub value: f64,
    pub stderr: f64,
    pub primitive: Primitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Sample mean and standard error of `n` shots of which `plus` read `+1`,
/// `minus` read `-1` and the rest `0`.
fn ternary_summary(n: u64, plus: u64, minus: u64) -> Estimate {
    let nf = n as f64;
    let mean = (plus as f64 - minus as f64) / nf;
    let second = (plus + minus) as f64 / nf;
    Estimate { value: mean, stderr: ((second - mean * mean).max(0.0) / nf).sqrt() }
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    let p = p.clamp(0.0, 1.0);
    Binomial::new(n, p).expect("probability clamped to [0, 1]").sample(rng)
}

/// Draws `n` shots with `P(+1) = p_plus`, `P(-1) = p_minus`, else `0`.
fn ternary_shots(rng: &mut ChaCha8Rng, n: u64, p_plus: f64, p_minus: f64) -> Estimate {
    let p_plus = p_plus.clamp(0.0, 1.0);
    let plus = binomial(rng, n, p_plus);
    let rest = 1.0 - p_plus;
    let minus = if rest > 0.0 { binomial(rng, n - plus, p_minus / rest) } else { 0 };
    ternary_summary(n, plus, minus)
}

fn check_state(state: &Operator) -> Result<()> {
    state.validate_density(ESTIMATOR_TOL)
}

/// `Tr(state^2)`, exactly or as a swap-test mean.
pub fn purity(state: &Operator, plan: &ShotPlan) -> Result<PurityEstimate> {
    check_state(state)?;
    let exact = state.purity();
    let est = match plan.shots {
        Shots::Exact => Estimate { value: exact, stderr: 0.0 },
        Shots::Finite(n) => {
            let p = (1.0 + exact) / 2.0;
            ternary_shots(&mut plan.rng(), n, p, 1.0 - p)
        }
    };
    Ok(PurityEstimate { value: est.value, stderr: est.stderr, primitive: Primitive::Swap })
}

/// `Tr(Z(state)^2)` with `Z` dephasing the selected subsystems.
///
/// Sampling uses the DIP statistic when every subsystem is dephased and the
/// PDIP statistic otherwise.
pub fn dephased_purity(state: &Operator, on: &SubsystemSelector, plan: &ShotPlan) -> Result<PurityEstimate> {
    check_state(state)?;
    let n_sub = state.dims().len();
    let full = on.covers_all(n_sub);
    let primitive = if full { Primitive::Dip } else { Primitive::Pdip };
    let est = match plan.shots {
        Shots::Exact => Estimate { value: dephase(state, on)?.purity(), stderr: 0.0 },
        Shots::Finite(n) => {
            let mut rng = plan.rng();
            if full {
                let q: f64 = (0..state.side()).map(|i| state.get(i, i).re.powi(2)).sum();
                ternary_shots(&mut rng, n, q, 0.0)
            } else {
                // match with probability sum p_a^2; on a match the parity has mean Tr(M_a^2)/p_a^2
                let (mut p_plus, mut p_minus) = (0.0, 0.0);
                for m in diagonal_blocks(state, on)? {
                    let p = m.trace().re;
                    if p <= 0.0 {
                        continue;
                    }
                    let w = p * p;
                    let parity = (m.purity() / w).clamp(-1.0, 1.0);
                    p_plus += w * (1.0 + parity) / 2.0;
                    p_minus += w * (1.0 - parity) / 2.0;
                }
                ternary_shots(&mut rng, n, p_plus, p_minus)
            }
        }
    };
    Ok(PurityEstimate { value: est.value, stderr: est.stderr, primitive })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Real,
    Imaginary,
}

/// Overlap `<phi| sigma |phi>` with `phi = (|a> + c |b>) / sqrt(2)`.
fn branch_overlap(sigma: &Operator, i: usize, j: usize, c: crate::qmath::C64) -> f64 {
    let (daa, dbb, dab) = (sigma.get(i, i).re, sigma.get(j, j).re, sigma.get(i, j));
    0.5 * (daa + dbb) + (c * dab).re
}

/// Real or imaginary part of `D(a, b) = <a| sigma_A |b>` by the two-branch
/// interference protocol: `Re = (R0 - R1)/2`, `Im = (I1 - I0)/2`.
///
/// Each sampled shot picks the control branch uniformly and runs a swap test
/// against the branch's reference superposition; `a == b` reduces to a swap
/// test against `|a>`.
pub fn element_readout(state: &BranchedState, a: &HistoryLabel, b: &HistoryLabel, part: Part, plan: &ShotPlan) -> Result<Estimate> {
    let i = a.index(state.ancilla_dims())?;
    let j = b.index(state.ancilla_dims())?;
    let sigma = state.sigma_a();
    let one = crate::qmath::ONE;
    let (r0, r1) = if i == j {
        match part {
            Part::Real => (sigma.get(i, i).re, 0.0),
            Part::Imaginary => return Ok(Estimate { value: 0.0, stderr: 0.0 }),
        }
    } else {
        match part {
            Part::Real => (branch_overlap(sigma, i, j, one), branch_overlap(sigma, i, j, -one)),
            // branch 0 holds I1 (reference |a> - i|b>), branch 1 holds I0
            Part::Imaginary => (branch_overlap(sigma, i, j, -crate::qmath::I), branch_overlap(sigma, i, j, crate::qmath::I)),
        }
    };
    let scale = if i == j { 1.0 } else { 0.5 };
    match plan.shots {
        Shots::Exact => Ok(Estimate { value: scale * (r0 - r1), stderr: 0.0 }),
        Shots::Finite(n) => {
            let mut rng = plan.rng();
            if i == j {
                let p = (1.0 + r0) / 2.0;
                return Ok(ternary_shots(&mut rng, n, p, 1.0 - p));
            }
            // shot value (-1)^c * s has mean (R0 - R1)/2
            let n0 = binomial(&mut rng, n, 0.5);
            let plus0 = binomial(&mut rng, n0, (1.0 + r0) / 2.0);
            let plus1 = binomial(&mut rng, n - n0, (1.0 + r1) / 2.0);
            let plus = plus0 + (n - n0 - plus1);
            Ok(ternary_summary(n, plus, n - plus))
        }
    }
}

/// Multinomial counts over `weights` (clamped at zero and renormalized).
pub fn multinomial(plan: &ShotPlan, n: u64, weights: &[f64]) -> Vec<u64> {
    let mut rng = plan.rng();
    let w: Vec<f64> = weights.iter().map(|&x| x.max(0.0)).collect();
    let mut rest_w: f64 = w.iter().sum();
    let mut rest_n = n;
    let mut out = Vec::with_capacity(w.len());
    for &x in &w {
        let c = if rest_n == 0 || rest_w <= 0.0 { 0 } else { binomial(&mut rng, rest_n, x / rest_w) };
        out.push(c);
        rest_n -= c;
        rest_w -= x;
    }
    if let (Some(last), true) = (w.iter().rposition(|&x| x > 0.0), rest_n > 0) {
        out[last] += rest_n;
    }
    out
}
