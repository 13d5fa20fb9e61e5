//! Training reflection patterns and their LS estimation MSE.
//!
//! A pattern is the `(M+1)×(M+1)` matrix whose rows are the reflection
//! vectors applied during the `M+1` training symbols. It is feasible when its
//! first column is all ones, every entry is unimodular with a phase in the
//! discrete set, and it has full rank.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard;
use crate::linalg::{self, ComplexMatrix, C64};

/// Rank tolerance used for pattern feasibility checks.
pub const RANK_TOL: f64 = 1e-9;

pub const PHASE_TOL: f64 = 1e-9;

/// Uniform `b`-bit phase-shift alphabet `{0, Δω, …, (K−1)Δω}`, `K = 2^b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PhaseShiftSet {
    bits: u32,
}

impl PhaseShiftSet {
    pub const MAX_BITS: u32 = 16;

    pub fn new(bits: u32) -> Result<Self> {
        if !(1..=Self::MAX_BITS).contains(&bits) {
            return Err(Error::InvalidConfig(format!(
                "phase resolution must be 1..={} bits, got {bits}",
                Self::MAX_BITS
            )));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> usize {
        1 << self.bits
    }

    pub fn step(&self) -> f64 {
        TAU / self.levels() as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.levels()).map(|q| q as f64 * self.step()).collect()
    }

    /// `e^{j q Δω}`, exact at quarter turns.
    pub fn phasor(&self, level: usize) -> C64 {
        exact_phasor(level % self.levels(), self.levels())
    }

    /// Index of the level nearest to `phase` on the unit circle. A phase
    /// exactly between two levels goes to the lower one, so a tie between
    /// the last level and a full turn keeps the last level.
    pub fn nearest_level(&self, phase: f64) -> usize {
        let k = self.levels();
        let x = phase.rem_euclid(TAU) / self.step();
        let below = x.floor();
        let frac = x - below;
        let lo = (below as usize) % k;
        let hi = (lo + 1) % k;
        if frac <= 0.5 + PHASE_TOL / self.step() {
            lo
        } else {
            hi
        }
    }

    /// Level index of a unimodular value, if its phase is in the set.
    pub fn level_of(&self, z: C64) -> Option<usize> {
        let q = self.nearest_level(z.arg());
        let target = q as f64 * self.step();
        let diff = (z.arg().rem_euclid(TAU) - target).abs();
        (diff.min(TAU - diff) <= PHASE_TOL).then_some(q)
    }
}

impl TryFrom<u32> for PhaseShiftSet {
    type Error = Error;
    fn try_from(bits: u32) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<PhaseShiftSet> for u32 {
    fn from(set: PhaseShiftSet) -> u32 {
        set.bits
    }
}

/// `e^{j 2π num/den}` with exact values on the axes.
pub(crate) fn exact_phasor(num: usize, den: usize) -> C64 {
    let num = num % den;
    if (4 * num).is_multiple_of(den) {
        match 4 * num / den {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    } else {
        C64::from_polar(1.0, TAU * num as f64 / den as f64)
    }
}

/// How a pattern was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    Naive,
    QuantizedDft,
    TruncatedHadamard { order: usize },
    /// The preferred construction was rank deficient; the naive pattern
    /// was substituted.
    NaiveFallback,
    Exhaustive,
    Custom,
}

/// A feasible training reflection pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionPattern {
    matrix: ComplexMatrix,
    phase_set: PhaseShiftSet,
    construction: Construction,
}

impl ReflectionPattern {
    /// Checks the first-column, unit-modulus and discrete-phase constraints.
    /// Rank is not checked here; see [`ReflectionPattern::is_full_rank`].
    pub fn new(matrix: ComplexMatrix, phase_set: PhaseShiftSet) -> Result<Self> {
        Self::with_construction(matrix, phase_set, Construction::Custom)
    }

    fn with_construction(
        matrix: ComplexMatrix,
        phase_set: PhaseShiftSet,
        construction: Construction,
    ) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InfeasiblePattern("pattern must be square".into()));
        }
        for i in 0..matrix.rows() {
            if (matrix[(i, 0)] - C64::new(1.0, 0.0)).norm() > 1e-12 {
                return Err(Error::InfeasiblePattern(format!("entry ({i}, 0) is not 1")));
            }
            for j in 0..matrix.cols() {
                let z = matrix[(i, j)];
                if (z.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::InfeasiblePattern(format!("entry ({i}, {j}) is not unimodular")));
                }
                if phase_set.level_of(z).is_none() {
                    return Err(Error::InfeasiblePattern(format!(
                        "entry ({i}, {j}) has a phase outside the {}-bit set",
                        phase_set.bits()
                    )));
                }
            }
        }
        Ok(Self {
            matrix,
            phase_set,
            construction,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn phase_set(&self) -> PhaseShiftSet {
        self.phase_set
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// `M + 1`.
    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn m_groups(&self) -> usize {
        self.size() - 1
    }

    pub fn gram(&self) -> ComplexMatrix {
        &self.matrix.adjoint() * &self.matrix
    }

    pub fn is_full_rank(&self) -> bool {
        linalg::matrix_rank(&self.matrix, RANK_TOL) == self.size()
    }

    /// True when `Θᴴ Θ = (M+1) I` within `tol`.
    pub fn is_orthogonal(&self, tol: f64) -> bool {
        let n = self.size();
        self.gram()
            .max_abs_diff(&ComplexMatrix::identity(n).scale(n as f64))
            <= tol
    }

    /// `(Θᴴ Θ)⁻¹`, the error covariance normalized by `σ²/P_t`.
    pub fn error_gram_inverse(&self) -> Result<ComplexMatrix> {
        Ok(linalg::invert(&self.gram())?.hermitian_part())
    }
}

/// `−1` on the diagonal below the first row, `+1` elsewhere.
pub fn naive_pattern(m_groups: usize) -> ReflectionPattern {
    assert!(m_groups >= 1, "at least one sub-surface is required");
    let n = m_groups + 1;
    let matrix = ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j && i != 0 {
            C64::new(-1.0, 0.0)
        } else {
            C64::new(1.0, 0.0)
        }
    });
    ReflectionPattern {
        matrix,
        phase_set: PhaseShiftSet { bits: 1 },
        construction: Construction::Naive,
    }
}

/// DFT matrix with entries `e^{−j2π ij/order}` (zero-based indices).
pub fn dft_matrix(order: usize) -> ComplexMatrix {
    assert!(order >= 1);
    ComplexMatrix::from_fn(order, order, |i, j| {
        exact_phasor((order - (i * j) % order) % order, order)
    })
}

/// Level index nearest to `e^{j2π p/n}` using exact integer arithmetic;
/// ties go to the lower neighbour, measured counter-clockwise.
fn quantize_fraction(p: usize, n: usize, levels: usize) -> usize {
    let num = p * levels;
    let below = num / n;
    let rem = num % n;
    let lo = below % levels;
    let hi = (below + 1) % levels;
    match (2 * rem).cmp(&n) {
        std::cmp::Ordering::Greater => hi,
        _ => lo,
    }
}

/// DFT matrix with every entry snapped to the nearest phase in the set.
/// Full rank is not guaranteed.
pub fn quantized_dft_pattern(m_groups: usize, phase_set: PhaseShiftSet) -> ReflectionPattern {
    assert!(m_groups >= 1, "at least one sub-surface is required");
    let n = m_groups + 1;
    let matrix = ComplexMatrix::from_fn(n, n, |i, j| {
        let target = (n - (i * j) % n) % n;
        phase_set.phasor(quantize_fraction(target, n, phase_set.levels()))
    });
    ReflectionPattern {
        matrix,
        phase_set,
        construction: Construction::QuantizedDft,
    }
}

/// Leading `(M+1)×(M+1)` block of the smallest constructible Hadamard
/// matrix of order at least `M+1`.
pub fn truncated_hadamard_pattern(m_groups: usize) -> Result<ReflectionPattern> {
    assert!(m_groups >= 1, "at least one sub-surface is required");
    let n = m_groups + 1;
    let order = hadamard::smallest_constructible_order(n, 2 * n).ok_or(Error::UnknownOrder(n))?;
    let full = hadamard::hadamard(order)?;
    Ok(ReflectionPattern {
        matrix: full.leading_block(n, n),
        phase_set: PhaseShiftSet { bits: 1 },
        construction: Construction::TruncatedHadamard { order },
    })
}

/// Quantized DFT for `b ≥ 2`, truncated Hadamard for `b = 1`; falls back to
/// the naive pattern if the construction is rank deficient.
pub fn design_pattern(m_groups: usize, phase_set: PhaseShiftSet) -> ReflectionPattern {
    let candidate = if phase_set.bits() >= 2 {
        Ok(quantized_dft_pattern(m_groups, phase_set))
    } else {
        truncated_hadamard_pattern(m_groups)
    };
    match candidate {
        Ok(p) if p.is_full_rank() => p,
        _ => ReflectionPattern {
            phase_set,
            construction: Construction::NaiveFallback,
            ..naive_pattern(m_groups)
        },
    }
}

/// `(σ²/P_t) · tr((Θᴴ Θ)⁻¹)`.
pub fn pattern_mse(pattern: &ReflectionPattern, pt: f64, sigma2: f64) -> Result<f64> {
    let r = pattern.error_gram_inverse()?;
    Ok(sigma2 / pt * r.trace().re)
}

/// Upper limit on `b·M·(M+1)` for the exhaustive pattern search.
pub const EXHAUSTIVE_PATTERN_LIMIT: usize = 20;

/// Brute-force minimizer of the MSE over every feasible full-rank pattern.
/// Ties keep the first pattern in lexicographic level order.
pub fn exhaustive_pattern_search(m_groups: usize, phase_set: PhaseShiftSet) -> Result<ReflectionPattern> {
    let n = m_groups + 1;
    let free = m_groups * n;
    let cost = phase_set.bits() as usize * free;
    if m_groups == 0 || cost > EXHAUSTIVE_PATTERN_LIMIT {
        return Err(Error::Intractable(format!(
            "pattern search over 2^{cost} candidates (limit 2^{EXHAUSTIVE_PATTERN_LIMIT})"
        )));
    }
    let k = phase_set.levels();
    let mut levels = vec![0usize; free];
    let mut best: Option<(f64, ComplexMatrix)> = None;
    loop {
        let matrix = ComplexMatrix::from_fn(n, n, |i, j| {
            if j == 0 {
                C64::new(1.0, 0.0)
            } else {
                phase_set.phasor(levels[i * m_groups + j - 1])
            }
        });
        let gram = &matrix.adjoint() * &matrix;
        if let Ok(inv) = linalg::invert(&gram) {
            let score = inv.trace().re;
            if best.as_ref().is_none_or(|(b, _)| score < *b - 1e-12) {
                best = Some((score, matrix));
            }
        }
        // odometer increment
        let mut pos = free;
        loop {
            if pos == 0 {
                let (_, matrix) = best.expect("the naive pattern is always feasible");
                return Ok(ReflectionPattern {
                    matrix,
                    phase_set,
                    construction: Construction::Exhaustive,
                });
            }
            pos -= 1;
            levels[pos] += 1;
            if levels[pos] < k {
                break;
            }
            levels[pos] = 0;
        }
    }
}
