//! Passive beamforming for data transmission: SINR and rate evaluation,
//! semidefinite relaxation with Gaussian randomization, quantization and
//! successive refinement over discrete phase shifts.

use rand::Rng;

use crate::channel::complex_gaussian;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, ComplexVector, C64};
use crate::sdp::{Constraint, StandardSdp};
use crate::training::{PhaseShiftSet, PHASE_TOL};

pub const DEFAULT_RANDOMIZATION_SAMPLES: usize = 1000;
pub const DEFAULT_REFINE_EPS: f64 = 1e-4;
pub const DEFAULT_SDP_TOL: f64 = 1e-9;
/// Upper limit on `b·M` for the exhaustive beam search.
pub const EXHAUSTIVE_BEAM_LIMIT: usize = 20;
/// Eigenvalue ratio below which a relaxed solution is treated as rank one.
pub const RANK_ONE_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resolution {
    Continuous,
    Discrete(PhaseShiftSet),
}

/// Unit-modulus reflection vector `[1, θ_1, …, θ_M]`. Discrete vectors
/// have the first entry exactly 1; continuous ones may carry a global phase.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionVector {
    theta: ComplexVector,
    resolution: Resolution,
}

impl ReflectionVector {
    pub fn continuous(theta: ComplexVector) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InfeasiblePattern("empty reflection vector".into()));
        }
        if let Some(m) = theta.iter().position(|z| (z.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::InfeasiblePattern(format!("entry {m} is not unimodular")));
        }
        Ok(Self {
            theta,
            resolution: Resolution::Continuous,
        })
    }

    pub fn discrete(theta: ComplexVector, phase_set: PhaseShiftSet) -> Result<Self> {
        let levels = theta
            .iter()
            .enumerate()
            .map(|(m, &z)| {
                if (z.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::InfeasiblePattern(format!("entry {m} is not unimodular")));
                }
                phase_set.level_of(z).ok_or_else(|| {
                    Error::InfeasiblePattern(format!("entry {m} is off the {}-bit grid", phase_set.bits()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        match levels.first() {
            Some(0) => Ok(Self::from_levels(&levels[1..], phase_set)),
            Some(_) => Err(Error::InfeasiblePattern("first entry must be 1".into())),
            None => Err(Error::InfeasiblePattern("empty reflection vector".into())),
        }
    }

    /// Discrete vector from the level indices of the `M` sub-surfaces.
    pub fn from_levels(levels: &[usize], phase_set: PhaseShiftSet) -> Self {
        let theta = std::iter::once(C64::new(1.0, 0.0))
            .chain(levels.iter().map(|&q| phase_set.phasor(q)))
            .collect();
        Self {
            theta,
            resolution: Resolution::Discrete(phase_set),
        }
    }

    pub fn theta(&self) -> &ComplexVector {
        &self.theta
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn m_groups(&self) -> usize {
        self.theta.len() - 1
    }

    /// Level indices of the `M` sub-surfaces, for discrete vectors.
    pub fn levels(&self) -> Option<Vec<usize>> {
        match self.resolution {
            Resolution::Discrete(set) => self.theta[1..].iter().map(|&z| set.level_of(z)).collect(),
            Resolution::Continuous => None,
        }
    }
}

/// Estimated channel, normalized error covariance and power budget of one
/// data-transmission design problem.
#[derive(Clone, Debug)]
pub struct BeamformingProblem {
    pub h_tilde: ComplexVector,
    /// `(Θ_pᴴ Θ_p)⁻¹`
    pub r_p: ComplexMatrix,
    pub pt: f64,
    pub sigma2: f64,
}

impl BeamformingProblem {
    pub fn new(h_tilde: ComplexVector, r_p: ComplexMatrix, pt: f64, sigma2: f64) -> Result<Self> {
        let n = h_tilde.len();
        if n == 0 || r_p.rows() != n || r_p.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "channel of length {n} with a {}x{} error matrix",
                r_p.rows(),
                r_p.cols()
            )));
        }
        if !(pt > 0.0) || !(sigma2 > 0.0) {
            return Err(Error::InvalidConfig("powers must be positive".into()));
        }
        if !h_tilde.is_finite() || !r_p.is_finite() {
            return Err(Error::InvalidConfig("problem data must be finite".into()));
        }
        if !r_p.is_hermitian(1e-9 * r_p.max_abs().max(1.0)) {
            return Err(Error::InvalidConfig("error matrix must be Hermitian".into()));
        }
        Ok(Self {
            h_tilde,
            r_p: r_p.hermitian_part(),
            pt,
            sigma2,
        })
    }

    pub fn size(&self) -> usize {
        self.h_tilde.len()
    }

    pub fn m_groups(&self) -> usize {
        self.size() - 1
    }

    pub fn snr(&self) -> f64 {
        self.pt / self.sigma2
    }

    /// `P_t |θᴴ h̃|² / (σ² (θᴴ R_p θ + 1))`.
    pub fn sinr(&self, theta: &ReflectionVector) -> f64 {
        self.sinr_of(theta.theta())
    }

    pub fn sinr_of(&self, theta: &ComplexVector) -> f64 {
        assert_eq!(theta.len(), self.size(), "reflection vector length");
        let signal = theta.inner(&self.h_tilde).norm_sqr();
        self.snr() * signal / (self.r_p.quad_form(theta) + 1.0)
    }

    /// SDP objective expressed in SINR units.
    pub fn relaxed_sinr(&self, solution: &SdpSolution) -> f64 {
        self.snr() * solution.objective
    }
}

/// `((T₀ − (M+1)) / T₀) · log₂(1 + γ/Γ)`.
pub fn achievable_rate(gamma: f64, m_groups: usize, t0: usize, gap_db: f64) -> Result<f64> {
    let training = m_groups + 1;
    if t0 <= training {
        return Err(Error::InvalidFrame { t0, training });
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!("SINR {gamma} must be non-negative")));
    }
    let gap = 10f64.powf(gap_db / 10.0);
    Ok((t0 - training) as f64 / t0 as f64 * (1.0 + gamma / gap).log2())
}

/// Best discrete vector by enumeration of all `2^{bM}` candidates.
pub fn exhaustive_beam_search(prob: &BeamformingProblem, phase_set: PhaseShiftSet) -> Result<ReflectionVector> {
    let m = prob.m_groups();
    let cost = phase_set.bits() as usize * m;
    if cost > EXHAUSTIVE_BEAM_LIMIT {
        return Err(Error::Intractable(format!(
            "beam search over 2^{cost} candidates (limit 2^{EXHAUSTIVE_BEAM_LIMIT})"
        )));
    }
    let k = phase_set.levels();
    let mut levels = vec![0usize; m];
    let mut best = (f64::NEG_INFINITY, levels.clone());
    loop {
        let value = prob.sinr(&ReflectionVector::from_levels(&levels, phase_set));
        if value > best.0 {
            best = (value, levels.clone());
        }
        // odometer with the first sub-surface as the most significant digit
        let Some(pos) = (0..m).rev().find(|&i| levels[i] + 1 < k) else {
            break;
        };
        levels[pos] += 1;
        levels[pos + 1..].iter_mut().for_each(|q| *q = 0);
    }
    Ok(ReflectionVector::from_levels(&best.1, phase_set))
}

/// Standard-form data of the Charnes-Cooper reformulation
///
/// ```text
/// maximize tr(H̃ Ψ)  s.t.  tr(R_p Ψ) + t = 1,  Ψ ⪰ 0,  Ψ_mm = t
/// ```
///
/// with `t` eliminated as `Ψ_00`. The cost is normalized by `‖h̃‖²`.
#[derive(Clone, Debug)]
pub struct SdpProblemData {
    pub sdp: StandardSdp,
    pub h_gram: ComplexMatrix,
    pub cost_scale: f64,
}

pub fn charnes_cooper(prob: &BeamformingProblem) -> SdpProblemData {
    let n = prob.size();
    let h_gram = ComplexMatrix::outer(&prob.h_tilde, &prob.h_tilde);
    let norm = prob.h_tilde.norm_sqr();
    let cost_scale = if norm > 0.0 { norm } else { 1.0 };
    let unit = |k: usize| {
        ComplexMatrix::from_fn(n, n, |i, j| C64::new(if i == k && j == k { 1.0 } else { 0.0 }, 0.0))
    };
    let mut constraints = vec![Constraint::new(&prob.r_p + &unit(0))];
    let mut rhs = vec![1.0];
    for m in 1..n {
        constraints.push(Constraint::new(&unit(m) - &unit(0)));
        rhs.push(0.0);
    }
    SdpProblemData {
        sdp: StandardSdp {
            cost: h_gram.scale(-1.0 / cost_scale),
            constraints,
            rhs,
        },
        h_gram,
        cost_scale,
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub psi: ComplexMatrix,
    pub t: f64,
    /// `Ψ / t`, unit diagonal.
    pub phi: ComplexMatrix,
    /// `tr(H̃ Ψ)`.
    pub objective: f64,
    pub iterations: usize,
}

pub fn solve_sdp(data: &SdpProblemData, tol: f64) -> Result<SdpSolution> {
    if !(1e-10..=1e-4).contains(&tol) {
        return Err(Error::InvalidConfig(format!("SDP tolerance {tol} outside [1e-10, 1e-4]")));
    }
    let sol = data.sdp.solve(tol)?;
    let psi = sol.x;
    let n = psi.rows();
    let t = psi.diagonal().iter().map(|d| d.re).sum::<f64>() / n as f64;
    if !(t > 0.0) {
        return Err(Error::NoConvergence {
            what: "SDP interior point (non-positive scaling variable)",
            iterations: sol.iterations,
        });
    }
    let phi = psi.scale(1.0 / t);
    let objective = data.h_gram.trace_product_re(&psi);
    Ok(SdpSolution {
        psi,
        t,
        phi,
        objective,
        iterations: sol.iterations,
    })
}

/// Unit-modulus projection keeping each entry's phase; zeros map to 1.
fn project_unimodular(v: &ComplexVector) -> ComplexVector {
    v.iter()
        .map(|z| if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) })
        .collect()
}

/// Rotates so the first entry is exactly 1.
fn normalize_reference(v: &ComplexVector) -> ComplexVector {
    let rot = v[0].conj() / v[0].norm();
    let mut out: ComplexVector = v.iter().map(|z| z * rot).collect();
    out[0] = C64::new(1.0, 0.0);
    out
}

/// Continuous vector drawn from a relaxed solution: the best of `samples`
/// projected Gaussian draws with covariance `phi` and its principal
/// eigenvector. A numerically rank-one `phi` returns the eigenvector.
pub fn gaussian_randomization(
    phi: &ComplexMatrix,
    prob: &BeamformingProblem,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<ReflectionVector> {
    let n = prob.size();
    if phi.rows() != n || phi.cols() != n {
        return Err(Error::DimensionMismatch("relaxed solution size".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("at least one randomization sample is required".into()));
    }
    let eig = linalg::eigh(phi)?;
    let top = eig.values[n - 1];
    let principal = normalize_reference(&project_unimodular(&eig.vector(n - 1)));
    if n == 1 || eig.values[n - 2].max(0.0) <= RANK_ONE_TOL * top {
        return ReflectionVector::continuous(principal);
    }
    let factor = ComplexMatrix::from_fn(n, n, |i, k| eig.vectors[(i, k)] * eig.values[k].max(0.0).sqrt());
    let mut best_value = prob.sinr_of(&principal);
    let mut best = principal;
    for _ in 0..samples {
        let w: ComplexVector = (0..n).map(|_| complex_gaussian(rng, 1.0)).collect();
        let candidate = project_unimodular(&(&factor * &w));
        let value = prob.sinr_of(&candidate);
        if value > best_value {
            best_value = value;
            best = candidate;
        }
    }
    ReflectionVector::continuous(normalize_reference(&best))
}

/// Rotates so the first entry is 1, then snaps every other phase to the
/// nearest level of `phase_set`.
pub fn rotate_and_quantize(theta: &ReflectionVector, phase_set: PhaseShiftSet) -> ReflectionVector {
    let rotated = normalize_reference(theta.theta());
    let levels: Vec<usize> = rotated[1..].iter().map(|z| phase_set.nearest_level(z.arg())).collect();
    ReflectionVector::from_levels(&levels, phase_set)
}

/// Matched-filter vector `θ_m = e^{j∠h̃_m}`.
pub fn matched_filter(prob: &BeamformingProblem) -> ReflectionVector {
    ReflectionVector {
        theta: project_unimodular(&prob.h_tilde),
        resolution: Resolution::Continuous,
    }
}

/// Output of the coordinate ascent with its per-sweep objective history.
#[derive(Clone, Debug)]
pub struct RefinementTrace {
    pub theta: ReflectionVector,
    /// Objective before the first sweep and after every sweep.
    pub history: Vec<f64>,
    pub sweeps: usize,
}

/// Cyclic coordinate ascent of `|θᴴh|² / (θᴴ R θ + 1)` over the discrete
/// phases of sub-surfaces `1..=M`. Stops once a full sweep improves the
/// objective by less than `eps` relative.
fn coordinate_ascent(
    start: &[usize],
    h: &ComplexVector,
    r: Option<&ComplexMatrix>,
    phase_set: PhaseShiftSet,
    eps: f64,
    scale: f64,
) -> RefinementTrace {
    let n = h.len();
    let k = phase_set.levels();
    let phasors: Vec<C64> = (0..k).map(|q| phase_set.phasor(q)).collect();
    let mut levels = start.to_vec();
    let theta_of = |levels: &[usize]| -> ComplexVector {
        std::iter::once(C64::new(1.0, 0.0))
            .chain(levels.iter().map(|&q| phasors[q]))
            .collect()
    };
    let evaluate = |theta: &ComplexVector| -> (C64, ComplexVector, f64) {
        let s = theta.inner(h);
        match r {
            Some(r) => {
                let r_theta = r * theta;
                let q = theta.inner(&r_theta).re + 1.0;
                (s, r_theta, q)
            }
            None => (s, ComplexVector::zeros(n), 1.0),
        }
    };

    let mut theta = theta_of(&levels);
    let (mut s, mut r_theta, mut q) = evaluate(&theta);
    let mut value = s.norm_sqr() / q;
    let mut history = vec![scale * value];
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let before = value;
        for m in 1..n {
            let current = theta[m];
            let r_mm = r.map_or(0.0, |r| r[(m, m)].re);
            let mut best = (value, levels[m - 1], s, q);
            for (lvl, &p) in phasors.iter().enumerate() {
                if lvl == levels[m - 1] {
                    continue;
                }
                let delta = p - current;
                let s_new = s + delta.conj() * h[m];
                let q_new = q + 2.0 * (delta.conj() * r_theta[m]).re + delta.norm_sqr() * r_mm;
                let v = s_new.norm_sqr() / q_new;
                if v > best.0 * (1.0 + 1e-12) {
                    best = (v, lvl, s_new, q_new);
                }
            }
            if best.1 != levels[m - 1] {
                let delta = phasors[best.1] - current;
                if let Some(r) = r {
                    for i in 0..n {
                        r_theta[i] += r[(i, m)] * delta;
                    }
                }
                levels[m - 1] = best.1;
                theta[m] = phasors[best.1];
                (value, s, q) = (best.0, best.2, best.3);
            }
        }
        // refresh to shed accumulated rounding
        (s, r_theta, q) = evaluate(&theta);
        value = s.norm_sqr() / q;
        history.push(scale * value);
        let gain = value - before;
        if gain <= eps * before.abs() || before == 0.0 && value == 0.0 {
            break;
        }
    }
    RefinementTrace {
        theta: ReflectionVector::from_levels(&levels, phase_set),
        history,
        sweeps,
    }
}

fn discrete_start(theta0: &ReflectionVector, phase_set: PhaseShiftSet) -> Result<Vec<usize>> {
    if theta0.resolution() != Resolution::Discrete(phase_set) {
        return Err(Error::InfeasiblePattern(format!(
            "initial vector is not on the {}-bit grid",
            phase_set.bits()
        )));
    }
    theta0
        .levels()
        .ok_or_else(|| Error::InfeasiblePattern("initial vector is off the grid".into()))
}

pub fn successive_refinement_trace(
    theta0: &ReflectionVector,
    prob: &BeamformingProblem,
    phase_set: PhaseShiftSet,
    eps: f64,
) -> Result<RefinementTrace> {
    if theta0.theta().len() != prob.size() {
        return Err(Error::DimensionMismatch("initial vector length".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig("refinement threshold must be positive".into()));
    }
    let start = discrete_start(theta0, phase_set)?;
    Ok(coordinate_ascent(&start, &prob.h_tilde, Some(&prob.r_p), phase_set, eps, prob.snr()))
}

/// Discrete SINR maximization by one-dimensional searches over each
/// sub-surface in turn.
pub fn successive_refinement(
    theta0: &ReflectionVector,
    prob: &BeamformingProblem,
    phase_set: PhaseShiftSet,
    eps: f64,
) -> Result<ReflectionVector> {
    Ok(successive_refinement_trace(theta0, prob, phase_set, eps)?.theta)
}

/// `(M+1) · λ_max((R_p + I/(M+1))⁻¹ H̃) · P_t/σ²`, valid for every
/// unit-modulus vector.
pub fn sinr_upper_bound(prob: &BeamformingProblem) -> Result<f64> {
    let n = prob.size();
    let shifted = &prob.r_p + &ComplexMatrix::identity(n).scale(1.0 / n as f64);
    let l = linalg::cholesky(&shifted)?;
    // H̃ is rank one, so λ_max = h̃ᴴ (R_p + I/(M+1))⁻¹ h̃ = ‖L⁻¹ h̃‖²
    let h = ComplexMatrix::from_vec(n, 1, prob.h_tilde.to_vec());
    let w = linalg::forward_substitute(&l, &h);
    let lambda: f64 = w.as_slice().iter().map(|z| z.norm_sqr()).sum();
    Ok(n as f64 * lambda * prob.snr())
}

/// Coordinate ascent on the channel gain `|θᴴ h̃|²` alone, started from the
/// quantized matched filter.
pub fn channel_gain_beam(prob: &BeamformingProblem, phase_set: PhaseShiftSet, eps: f64) -> ReflectionVector {
    let start = rotate_and_quantize(&matched_filter(prob), phase_set);
    let levels = start.levels().expect("quantized vector is discrete");
    coordinate_ascent(&levels, &prob.h_tilde, None, phase_set, eps, 1.0).theta
}

/// Continuous initial vector from the relaxation, or the matched filter
/// if the SDP solver fails numerically.
#[derive(Clone, Debug)]
pub struct Initialization {
    pub continuous: ReflectionVector,
    pub sdp: Option<SdpSolution>,
}

pub fn sdr_initialization(
    prob: &BeamformingProblem,
    samples: usize,
    tol: f64,
    rng: &mut impl Rng,
) -> Result<Initialization> {
    match solve_sdp(&charnes_cooper(prob), tol) {
        Ok(sol) => Ok(Initialization {
            continuous: gaussian_randomization(&sol.phi, prob, samples, rng)?,
            sdp: Some(sol),
        }),
        Err(e) if e.is_numerical() => Ok(Initialization {
            continuous: matched_filter(prob),
            sdp: None,
        }),
        Err(e) => Err(e),
    }
}

/// Checks that a candidate is on the grid and has unit modulus within the
/// phase tolerance.
pub fn is_feasible(theta: &ReflectionVector, phase_set: PhaseShiftSet) -> bool {
    let t = theta.theta();
    (t[0] - C64::new(1.0, 0.0)).norm() <= PHASE_TOL
        && t.iter().all(|z| (z.norm() - 1.0).abs() <= PHASE_TOL && phase_set.level_of(*z).is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_3, PI};

    fn set(bits: u32) -> PhaseShiftSet {
        PhaseShiftSet::new(bits).unwrap()
    }

    fn cvec(v: &[(f64, f64)]) -> ComplexVector {
        v.iter().map(|&(re, im)| C64::new(re, im)).collect()
    }

    fn random_problem(n: usize, rng: &mut impl Rng) -> BeamformingProblem {
        let h: ComplexVector = (0..n).map(|_| complex_gaussian(rng, 1.0)).collect();
        let a = ComplexMatrix::from_fn(n, n, |_, _| complex_gaussian(rng, 1.0));
        let r = (&a * &a.adjoint()).scale(0.2 / n as f64);
        BeamformingProblem::new(h, r, 1.0, 0.5).unwrap()
    }

    fn all_discrete(m: usize, phase_set: PhaseShiftSet) -> Vec<ReflectionVector> {
        let k = phase_set.levels();
        (0..k.pow(m as u32))
            .map(|mut idx| {
                let mut levels = vec![0; m];
                for q in levels.iter_mut().rev() {
                    *q = idx % k;
                    idx /= k;
                }
                ReflectionVector::from_levels(&levels, phase_set)
            })
            .collect()
    }

    #[test]
    fn sinr_examples() {
        let prob = BeamformingProblem::new(
            ComplexVector::from_real(&[1.0, 0.0]),
            ComplexMatrix::identity(2),
            2.0,
            1.0,
        )
        .unwrap();
        for lvl in 0..2 {
            let theta = ReflectionVector::from_levels(&[lvl], set(1));
            // numerator P_t·|θ_0 h_0|² = 2, denominator σ²(2 + 1)
            assert!((prob.sinr(&theta) - 2.0 / 3.0).abs() < 1e-15);
        }

        let prob = BeamformingProblem::new(
            ComplexVector::from_real(&[1.0, 1.0]),
            ComplexMatrix::identity(2).scale(0.5),
            1.0,
            1.0,
        )
        .unwrap();
        let plus = ReflectionVector::from_levels(&[0], set(1));
        let minus = ReflectionVector::from_levels(&[1], set(1));
        assert!((prob.sinr(&plus) - 2.0).abs() < 1e-15);
        assert!(prob.sinr(&minus).abs() < 1e-15);
    }

    #[test]
    fn sinr_is_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let prob = random_problem(5, &mut rng);
            let theta: ComplexVector = (0..5).map(|_| C64::from_polar(1.0, rng.random_range(0.0..6.3))).collect();
            let alpha = rng.random_range(0.0..6.3);
            let rotated = theta.scale(C64::from_polar(1.0, alpha));
            let (a, b) = (prob.sinr_of(&theta), prob.sinr_of(&rotated));
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(achievable_rate(0.0, 4, 40, 8.2).unwrap(), 0.0);
        assert!((achievable_rate(1.0, 4, 40, 0.0).unwrap() - 0.875).abs() < 1e-15);
        let gamma = 10f64.powf(0.82);
        assert!((achievable_rate(gamma, 4, 40, 8.2).unwrap() - 0.875).abs() < 1e-12);
        assert!(matches!(
            achievable_rate(1.0, 4, 5, 0.0),
            Err(Error::InvalidFrame { t0: 5, training: 5 })
        ));
        assert!(achievable_rate(-1.0, 1, 40, 0.0).is_err());
    }

    #[test]
    fn exhaustive_beam_examples() {
        let prob = |h: &[f64]| {
            BeamformingProblem::new(ComplexVector::from_real(h), ComplexMatrix::identity(2), 1.0, 1.0).unwrap()
        };
        let best = exhaustive_beam_search(&prob(&[1.0, 1.0]), set(1)).unwrap();
        assert_eq!(best.theta(), &ComplexVector::from_real(&[1.0, 1.0]));
        let best = exhaustive_beam_search(&prob(&[1.0, -1.0]), set(1)).unwrap();
        assert_eq!(best.theta(), &ComplexVector::from_real(&[1.0, -1.0]));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = random_problem(4, &mut rng);
            let best = exhaustive_beam_search(&p, set(2)).unwrap();
            let ones = ReflectionVector::from_levels(&[0, 0, 0], set(2));
            assert!(p.sinr(&best) >= p.sinr(&ones));
        }
        let big = random_problem(12, &mut rng);
        assert!(matches!(exhaustive_beam_search(&big, set(2)), Err(Error::Intractable(_))));
        assert!(matches!(exhaustive_beam_search(&big, set(3)), Err(Error::Intractable(_))));
    }

    #[test]
    fn exhaustive_ties_go_to_first_candidate() {
        // zero channel: every vector ties, the all-zero level vector wins
        let prob = BeamformingProblem::new(ComplexVector::zeros(3), ComplexMatrix::identity(3), 1.0, 1.0).unwrap();
        let best = exhaustive_beam_search(&prob, set(2)).unwrap();
        assert_eq!(best.levels().unwrap(), vec![0, 0]);
    }

    #[test]
    fn charnes_cooper_feasible_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prob = random_problem(4, &mut rng);
        let data = charnes_cooper(&prob);
        let t = 1.0 / (1.0 + prob.r_p.trace().re);
        let psi = ComplexMatrix::identity(4).scale(t);
        assert!((data.sdp.constraints[0].matrix().trace_product_re(&psi) - 1.0).abs() < 1e-14);
        for c in &data.sdp.constraints[1..] {
            assert!(c.matrix().trace_product_re(&psi).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_direct_link_only() {
        let prob =
            BeamformingProblem::new(cvec(&[(0.6, -0.8)]), ComplexMatrix::from_real_rows(&[&[3.0]]), 1.0, 1.0).unwrap();
        let sol = solve_sdp(&charnes_cooper(&prob), 1e-9).unwrap();
        assert!((sol.t - 0.25).abs() < 1e-9);
        assert!((sol.objective - 0.25).abs() < 1e-9);
    }

    #[test]
    fn sdp_solution_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 3, 5, 9, 17] {
            let prob = random_problem(n, &mut rng);
            let sol = solve_sdp(&charnes_cooper(&prob), 1e-9).unwrap();
            assert!(sol.t > 0.0);
            assert!(sol.psi.is_hermitian(1e-14));
            assert!(linalg::eigh(&sol.psi).unwrap().values[0] > -1e-8);
            for m in 0..n {
                assert!((sol.psi[(m, m)].re - sol.t).abs() < 1e-8);
                assert!((sol.phi[(m, m)].re - 1.0).abs() < 1e-7);
            }
            let lhs = prob.r_p.trace_product_re(&sol.psi) + sol.t;
            assert!((lhs - 1.0).abs() < 1e-8);
        }
    }

    /// For M = 1 a feasible `Φ` is `[[1, z], [z*, 1]]` with `|z| ≤ 1` and
    /// `t` fixed by the linear constraint. Coarse polar grid over `z`, then a
    /// shrinking local search around the best grid point.
    #[test]
    fn sdp_matches_grid_search_for_two_by_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let prob = random_problem(2, &mut rng);
            let sol = solve_sdp(&charnes_cooper(&prob), 1e-10).unwrap();
            let h = &prob.h_tilde;
            let r = &prob.r_p;
            let h01 = h[0] * h[1].conj();
            let objective = |rho: f64, angle: f64| {
                let z = C64::from_polar(rho.clamp(0.0, 1.0), angle);
                let t = 1.0 / (r[(0, 0)].re + r[(1, 1)].re + 2.0 * (r[(1, 0)] * z).re + 1.0);
                t * (h[0].norm_sqr() + h[1].norm_sqr() + 2.0 * (h01.conj() * z).re)
            };
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
            for a in 0..=200 {
                for b in 0..360 {
                    let (rho, angle) = (a as f64 / 200.0, b as f64 * PI / 180.0);
                    let v = objective(rho, angle);
                    if v > best.0 {
                        best = (v, rho, angle);
                    }
                }
            }
            let (mut dr, mut da) = (0.005, PI / 180.0);
            while da > 1e-12 {
                let mut moved = false;
                for (sr, sa) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                    let (rho, angle) = ((best.1 + sr * dr).clamp(0.0, 1.0), best.2 + sa * da);
                    let v = objective(rho, angle);
                    if v > best.0 {
                        best = (v, rho, angle);
                        moved = true;
                    }
                }
                if !moved {
                    dr *= 0.5;
                    da *= 0.5;
                }
            }
            assert!((sol.objective - best.0).abs() < 1e-6 * best.0, "sdp {} grid {}", sol.objective, best.0);
        }
    }

    #[test]
    fn relaxation_bounds_every_discrete_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let prob = random_problem(4, &mut rng);
            let sol = solve_sdp(&charnes_cooper(&prob), 1e-9).unwrap();
            let best = prob.sinr(&exhaustive_beam_search(&prob, set(2)).unwrap());
            assert!(prob.relaxed_sinr(&sol) >= best * (1.0 - 1e-6));
        }
    }

    #[test]
    fn scaled_identity_error_gives_rank_one_relaxation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut prob = random_problem(4, &mut rng);
        prob.r_p = ComplexMatrix::identity(4).scale(0.3);
        let sol = solve_sdp(&charnes_cooper(&prob), 1e-9).unwrap();
        // optimum is the matched filter: Φ = θθᴴ with θ_m = e^{j∠h_m}
        let mf = matched_filter(&prob);
        let expected = ComplexMatrix::outer(mf.theta(), mf.theta());
        assert!(sol.phi.max_abs_diff(&expected) < 1e-5);
        let best = prob.sinr(&mf);
        assert!((prob.relaxed_sinr(&sol) - best).abs() < 1e-7 * best);
    }

    #[test]
    fn randomization_rank_one_shortcut() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let prob = random_problem(4, &mut rng);
        let theta = cvec(&[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.6, 0.8)]);
        let phi = ComplexMatrix::outer(&theta, &theta);
        let mut a = ChaCha8Rng::seed_from_u64(0);
        let out = gaussian_randomization(&phi, &prob, 10, &mut a).unwrap();
        assert!(out.theta().max_abs_diff(&theta) < 1e-9);
        // nothing was drawn
        let mut b = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn randomization_is_deterministic_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let prob = random_problem(5, &mut rng);
        let phi = solve_sdp(&charnes_cooper(&prob), 1e-9).unwrap().phi;
        let a = gaussian_randomization(&phi, &prob, 200, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = gaussian_randomization(&phi, &prob, 200, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.theta().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert_eq!(a.theta()[0], C64::new(1.0, 0.0));
    }

    #[test]
    fn randomization_is_close_to_relaxation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut close = 0;
        for _ in 0..100 {
            let prob = random_problem(4, &mut rng);
            let sol = solve_sdp(&charnes_cooper(&prob), 1e-9).unwrap();
            let theta = gaussian_randomization(&sol.phi, &prob, 1000, &mut rng).unwrap();
            if prob.sinr(&theta) >= 0.95 * prob.relaxed_sinr(&sol) {
                close += 1;
            }
        }
        assert!(close >= 80, "{close}/100");
    }

    #[test]
    fn rotate_and_quantize_examples() {
        let theta = ReflectionVector::continuous(cvec(&[
            (FRAC_PI_3.cos(), FRAC_PI_3.sin()),
            ((2.0 * FRAC_PI_3).cos(), (2.0 * FRAC_PI_3).sin()),
        ]))
        .unwrap();
        let q = rotate_and_quantize(&theta, set(1));
        assert_eq!(q.theta(), &ComplexVector::from_real(&[1.0, 1.0]));

        let d = ReflectionVector::from_levels(&[3, 1, 0, 2], set(2));
        let cont = ReflectionVector::continuous(d.theta().clone()).unwrap();
        assert_eq!(rotate_and_quantize(&cont, set(2)), d);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let prob = random_problem(3, &mut rng);
        let raw: ComplexVector = (0..3).map(|_| C64::from_polar(1.0, rng.random_range(0.0..6.3))).collect();
        let rotated = normalize_reference(&raw);
        assert!((prob.sinr_of(&raw) - prob.sinr_of(&rotated)).abs() < 1e-12 * prob.sinr_of(&raw));
    }

    #[test]
    fn refinement_fixed_point_at_optimum() {
        let prob =
            BeamformingProblem::new(ComplexVector::from_real(&[1.0, 1.0]), ComplexMatrix::identity(2), 1.0, 1.0)
                .unwrap();
        let opt = exhaustive_beam_search(&prob, set(1)).unwrap();
        let out = successive_refinement(&opt, &prob, set(1), DEFAULT_REFINE_EPS).unwrap();
        assert_eq!(out, opt);
    }

    #[test]
    fn refinement_improves_and_never_beats_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let prob = random_problem(5, &mut rng);
            let init = sdr_initialization(&prob, 1000, 1e-9, &mut rng).unwrap();
            let start = rotate_and_quantize(&init.continuous, set(1));
            let trace = successive_refinement_trace(&start, &prob, set(1), DEFAULT_REFINE_EPS).unwrap();
            assert!(trace.history.windows(2).all(|w| w[1] >= w[0]));
            let final_sinr = prob.sinr(&trace.theta);
            assert!(final_sinr >= prob.sinr(&start));
            assert!((trace.history.last().unwrap() - final_sinr).abs() <= 1e-12 * final_sinr);
            let best = prob.sinr(&exhaustive_beam_search(&prob, set(1)).unwrap());
            assert!(final_sinr <= best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn refinement_ends_at_coordinate_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let prob = random_problem(6, &mut rng);
            let start = ReflectionVector::from_levels(&[0; 5], set(2));
            let out = successive_refinement(&start, &prob, set(2), 1e-12).unwrap();
            let value = prob.sinr(&out);
            let levels = out.levels().unwrap();
            for m in 0..5 {
                for q in 0..4 {
                    let mut alt = levels.clone();
                    alt[m] = q;
                    let v = prob.sinr(&ReflectionVector::from_levels(&alt, set(2)));
                    assert!(v <= value * (1.0 + 1e-9));
                }
            }
        }
    }

    #[test]
    fn refinement_rejects_off_grid_start() {
        let prob =
            BeamformingProblem::new(ComplexVector::from_real(&[1.0, 1.0]), ComplexMatrix::identity(2), 1.0, 1.0)
                .unwrap();
        let start = ReflectionVector::from_levels(&[1], set(2));
        assert!(successive_refinement(&start, &prob, set(1), 1e-4).is_err());
        let cont = matched_filter(&prob);
        assert!(successive_refinement(&cont, &prob, set(1), 1e-4).is_err());
    }

    #[test]
    fn upper_bound_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        // zero error: aligned all-ones vector reaches (M+1)‖h̃‖², below the bound
        let h = ComplexVector::from_real(&[0.5; 4]);
        let prob = BeamformingProblem::new(h.clone(), ComplexMatrix::zeros(4, 4), 2.0, 1.0).unwrap();
        let ones = ReflectionVector::from_levels(&[0; 3], set(1));
        let achieved = prob.sinr(&ones);
        assert!((achieved - 4.0 * h.norm_sqr() * 2.0).abs() < 1e-12);
        let bound = sinr_upper_bound(&prob).unwrap();
        assert!((bound - 16.0 * h.norm_sqr() * 2.0).abs() < 1e-12);

        for _ in 0..100 {
            let prob = random_problem(4, &mut rng);
            let best = prob.sinr(&exhaustive_beam_search(&prob, set(2)).unwrap());
            let bound = sinr_upper_bound(&prob).unwrap();
            assert!(bound >= best);
            let mut scaled = prob.clone();
            scaled.h_tilde = prob.h_tilde.scale(C64::new(0.0, 3.0));
            let b2 = sinr_upper_bound(&scaled).unwrap();
            assert!((b2 - 9.0 * bound).abs() < 1e-10 * b2);
        }
    }

    /// Independent oracle for the bound: the largest generalized eigenvalue
    /// by dense eigendecomposition of `A^{-1/2} H̃ A^{-1/2}`.
    #[test]
    fn upper_bound_matches_dense_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..20 {
            let prob = random_problem(5, &mut rng);
            let a = &prob.r_p + &ComplexMatrix::identity(5).scale(0.2);
            let eig = linalg::eigh(&a).unwrap();
            let inv_sqrt = ComplexMatrix::from_fn(5, 5, |i, j| {
                (0..5)
                    .map(|k| eig.vectors[(i, k)] * eig.vectors[(j, k)].conj() / eig.values[k].sqrt())
                    .sum()
            });
            let hg = ComplexMatrix::outer(&prob.h_tilde, &prob.h_tilde);
            let x = &(&inv_sqrt * &hg) * &inv_sqrt;
            let lmax = linalg::hermitian_eig_max(&x).unwrap().0;
            let expected = 5.0 * lmax * prob.snr();
            let bound = sinr_upper_bound(&prob).unwrap();
            assert!((bound - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn channel_gain_examples() {
        let prob =
            BeamformingProblem::new(ComplexVector::from_real(&[1.0, 1.0]), ComplexMatrix::identity(2), 1.0, 1.0)
                .unwrap();
        assert_eq!(channel_gain_beam(&prob, set(1), 1e-4).theta(), &ComplexVector::from_real(&[1.0, 1.0]));

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let mut prob = random_problem(4, &mut rng);
            let best = prob.sinr(&exhaustive_beam_search(&prob, set(2)).unwrap());
            let cg = channel_gain_beam(&prob, set(2), 1e-4);
            assert!(prob.sinr(&cg) <= best * (1.0 + 1e-12));

            // with a constant denominator both ascents select the same vector
            prob.r_p = ComplexMatrix::zeros(4, 4);
            let start = rotate_and_quantize(&matched_filter(&prob), set(2));
            let sr = successive_refinement(&start, &prob, set(2), 1e-4).unwrap();
            assert_eq!(channel_gain_beam(&prob, set(2), 1e-4), sr);
        }
    }

    #[test]
    fn scaled_identity_argmax_matches_channel_gain_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..50 {
            let mut prob = random_problem(4, &mut rng);
            prob.r_p = ComplexMatrix::identity(4).scale(0.7);
            let by_sinr = exhaustive_beam_search(&prob, set(2)).unwrap();
            let gain = |t: &ReflectionVector| t.theta().inner(&prob.h_tilde).norm_sqr();
            let best_gain = all_discrete(3, set(2)).iter().map(gain).fold(0.0, f64::max);
            assert!((gain(&by_sinr) - best_gain).abs() <= 1e-12 * best_gain);
        }
    }

    #[test]
    fn discrete_constructor_checks_grid() {
        let ok = ReflectionVector::discrete(ComplexVector::from_real(&[1.0, -1.0]), set(1)).unwrap();
        assert_eq!(ok.levels().unwrap(), vec![1]);
        assert!(ReflectionVector::discrete(ComplexVector::from_real(&[-1.0, 1.0]), set(1)).is_err());
        assert!(ReflectionVector::discrete(cvec(&[(1.0, 0.0), (0.0, 1.0)]), set(1)).is_err());
        assert!(ReflectionVector::continuous(ComplexVector::from_real(&[1.0, 0.5])).is_err());
        assert!(is_feasible(&ok, set(1)));
    }

    #[test]
    fn pipeline_falls_back_only_on_numerical_failure() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let prob = random_problem(4, &mut rng);
        let init = sdr_initialization(&prob, 100, 1e-9, &mut rng).unwrap();
        assert!(init.sdp.is_some());
        assert!(sdr_initialization(&prob, 100, 1.0, &mut rng).is_err());
    }
}
