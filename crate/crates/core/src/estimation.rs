//! Training-phase simulation and least-squares channel estimation.

use rand::Rng;

use crate::channel::complex_gaussian;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, Lu, C64};
use crate::training::ReflectionPattern;

/// Received pilots for one training phase.
#[derive(Clone, Debug)]
pub struct TrainingObservation {
    pub y_p: ComplexVector,
    pub pilots: ComplexVector,
    pub pattern: ReflectionPattern,
}

/// LS estimate with its error covariance.
#[derive(Clone, Debug)]
pub struct EstimationResult {
    pub h_est: ComplexVector,
    /// `(σ²/P_t) (Θᴴ Θ)⁻¹`
    pub cov: ComplexMatrix,
    /// `(Θᴴ Θ)⁻¹`
    pub r_p: ComplexMatrix,
    pub mse_analytic: f64,
}

/// Every pilot is `√P_t`.
pub fn constant_pilots(len: usize, pt: f64) -> ComplexVector {
    ComplexVector::new(vec![C64::new(pt.sqrt(), 0.0); len])
}

/// Independent `CN(0, σ²)` receiver noise, one sample per training symbol.
pub fn training_noise(len: usize, sigma2: f64, rng: &mut impl Rng) -> ComplexVector {
    (0..len).map(|_| complex_gaussian(rng, sigma2)).collect()
}

/// `y_p[m] = x_p[m] · θ_p[m]ᴴ h + z_p[m]` for a given noise vector.
pub fn simulate_training_with_noise(
    h_ext: &ComplexVector,
    pattern: &ReflectionPattern,
    pt: f64,
    noise: &ComplexVector,
) -> Result<TrainingObservation> {
    let n = pattern.size();
    if h_ext.len() != n || noise.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "pattern of size {n} with channel of length {} and {} noise samples",
            h_ext.len(),
            noise.len()
        )));
    }
    if !(pt > 0.0) {
        return Err(Error::InvalidConfig("transmit power must be positive".into()));
    }
    let pilots = constant_pilots(n, pt);
    let g = pattern.matrix() * h_ext;
    let y_p = (0..n).map(|m| pilots[m] * g[m] + noise[m]).collect();
    Ok(TrainingObservation {
        y_p,
        pilots,
        pattern: pattern.clone(),
    })
}

pub fn simulate_training(
    h_ext: &ComplexVector,
    pattern: &ReflectionPattern,
    pt: f64,
    sigma2: f64,
    rng: &mut impl Rng,
) -> Result<TrainingObservation> {
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidConfig("noise power must be non-negative".into()));
    }
    let noise = training_noise(pattern.size(), sigma2, rng);
    simulate_training_with_noise(h_ext, pattern, pt, &noise)
}

/// LS estimator for a fixed pattern; factors `Θ_p` once.
#[derive(Clone, Debug)]
pub struct LsEstimator {
    lu: Lu,
    r_p: ComplexMatrix,
    pt: f64,
    sigma2: f64,
}

impl LsEstimator {
    pub fn new(pattern: &ReflectionPattern, pt: f64, sigma2: f64) -> Result<Self> {
        let lu = Lu::new(pattern.matrix())?;
        let r_p = pattern.error_gram_inverse()?;
        Ok(Self { lu, r_p, pt, sigma2 })
    }

    pub fn r_p(&self) -> &ComplexMatrix {
        &self.r_p
    }

    pub fn covariance(&self) -> ComplexMatrix {
        self.r_p.scale(self.sigma2 / self.pt)
    }

    pub fn mse(&self) -> f64 {
        self.sigma2 / self.pt * self.r_p.trace().re
    }

    /// `h̃ = Θ_p⁻¹ X_p⁻¹ y_p`.
    pub fn estimate_channel(&self, obs: &TrainingObservation) -> Result<ComplexVector> {
        if obs.y_p.len() != obs.pilots.len() {
            return Err(Error::DimensionMismatch("pilots and observations differ in length".into()));
        }
        if obs.pilots.iter().any(|x| x.norm() == 0.0) {
            return Err(Error::InvalidConfig("pilot symbols must be nonzero".into()));
        }
        let g: ComplexVector = obs.y_p.iter().zip(obs.pilots.iter()).map(|(y, x)| y / x).collect();
        Ok(self.lu.solve(&g))
    }

    pub fn estimate(&self, obs: &TrainingObservation) -> Result<EstimationResult> {
        Ok(EstimationResult {
            h_est: self.estimate_channel(obs)?,
            cov: self.covariance(),
            r_p: self.r_p.clone(),
            mse_analytic: self.mse(),
        })
    }
}

pub fn ls_estimate(obs: &TrainingObservation, pt: f64, sigma2: f64) -> Result<EstimationResult> {
    LsEstimator::new(&obs.pattern, pt, sigma2)?.estimate(obs)
}

/// Monte-Carlo average of `‖h̃ − h‖²` over fresh noise draws.
pub fn empirical_mse(
    h_ext: &ComplexVector,
    pattern: &ReflectionPattern,
    pt: f64,
    sigma2: f64,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    let estimator = LsEstimator::new(pattern, pt, sigma2)?;
    let mut total = 0.0;
    for _ in 0..trials {
        let obs = simulate_training(h_ext, pattern, pt, sigma2, rng)?;
        let h_est = estimator.estimate_channel(&obs)?;
        total += h_est
            .iter()
            .zip(h_ext.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>();
    }
    Ok(total / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{design_pattern, naive_pattern, pattern_mse, PhaseShiftSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_channel(n: usize, rng: &mut impl Rng) -> ComplexVector {
        (0..n).map(|_| complex_gaussian(rng, 1.0)).collect()
    }

    #[test]
    fn noiseless_naive_two_by_two() {
        let h = ComplexVector::from_real(&[1.0, 1.0]);
        let pt: f64 = 4.0;
        let obs = simulate_training_with_noise(&h, &naive_pattern(1), pt, &ComplexVector::zeros(2)).unwrap();
        let expected = ComplexVector::from_real(&[2.0 * pt.sqrt(), 0.0]);
        assert!(obs.y_p.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn noiseless_training_matches_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pattern = design_pattern(6, PhaseShiftSet::new(2).unwrap());
        let h = random_channel(7, &mut rng);
        let obs = simulate_training(&h, &pattern, 2.5, 0.0, &mut rng).unwrap();
        let expected = (pattern.matrix() * &h).scale(C64::new(2.5f64.sqrt(), 0.0));
        assert!(obs.y_p.max_abs_diff(&expected) < 1e-14);
        let est = ls_estimate(&obs, 2.5, 0.0).unwrap();
        assert!(est.h_est.max_abs_diff(&h) < 1e-10);
    }

    #[test]
    fn noise_variance_matches_sigma2() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sigma2 = 0.3;
        let draws = 100_000;
        let h = ComplexVector::from_real(&[0.5, -0.25]);
        let pattern = naive_pattern(1);
        let clean = simulate_training_with_noise(&h, &pattern, 1.0, &ComplexVector::zeros(2)).unwrap();
        let mut samples = Vec::with_capacity(draws);
        for _ in 0..draws {
            let obs = simulate_training(&h, &pattern, 1.0, sigma2, &mut rng).unwrap();
            samples.push(obs.y_p[0] - clean.y_p[0]);
        }
        let mean: C64 = samples.iter().sum::<C64>() / draws as f64;
        let var = samples.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (draws - 1) as f64;
        assert!((var / sigma2 - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn orthogonal_pattern_covariance_is_scaled_identity() {
        let pattern = design_pattern(7, PhaseShiftSet::new(1).unwrap());
        let est = LsEstimator::new(&pattern, 1.0, 1e-3).unwrap();
        let expected = ComplexMatrix::identity(8).scale(1e-3 / 8.0);
        assert!(est.covariance().max_abs_diff(&expected) < 1e-18);
        assert!((est.mse() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn naive_trace_of_covariance() {
        let est = LsEstimator::new(&naive_pattern(2), 1.0, 1.0).unwrap();
        assert!((est.covariance().trace().re - 1.5).abs() < 1e-14);
    }

    #[test]
    fn covariance_is_hermitian_psd_and_channel_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pattern = design_pattern(4, PhaseShiftSet::new(2).unwrap());
        let a = simulate_training(&random_channel(5, &mut rng), &pattern, 1.0, 0.1, &mut rng).unwrap();
        let b = simulate_training(&random_channel(5, &mut rng), &pattern, 1.0, 0.1, &mut rng).unwrap();
        let ea = ls_estimate(&a, 1.0, 0.1).unwrap();
        let eb = ls_estimate(&b, 1.0, 0.1).unwrap();
        assert_eq!(ea.cov, eb.cov);
        assert!(ea.cov.is_hermitian(1e-12));
        let eig = crate::linalg::eigh(&ea.cov).unwrap();
        assert!(eig.values[0] >= -1e-12);
        assert!((ea.mse_analytic - ea.cov.trace().re).abs() <= 1e-12 * ea.mse_analytic);
    }

    #[test]
    fn empirical_mse_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = random_channel(3, &mut rng);
        let zero = empirical_mse(&h, &naive_pattern(2), 1.0, 0.0, 100, &mut rng).unwrap();
        assert!(zero <= 1e-18);

        let mse = empirical_mse(&h, &naive_pattern(2), 1.0, 1e-3, 10_000, &mut rng).unwrap();
        assert!((mse / 1.5e-3 - 1.0).abs() < 0.05, "naive {mse}");

        let pattern = design_pattern(7, PhaseShiftSet::new(1).unwrap());
        let h8 = random_channel(8, &mut rng);
        let mse = empirical_mse(&h8, &pattern, 1.0, 1e-3, 10_000, &mut rng).unwrap();
        assert!((mse / 1e-3 - 1.0).abs() < 0.05, "orthogonal {mse}");
        assert!(empirical_mse(&h8, &pattern, 1.0, 1e-3, 0, &mut rng).is_err());
    }

    #[test]
    fn estimate_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pattern = design_pattern(5, PhaseShiftSet::new(2).unwrap());
        let h = random_channel(6, &mut rng);
        let estimator = LsEstimator::new(&pattern, 1.0, 0.01).unwrap();
        let trials = 20_000;
        let mut sum = ComplexVector::zeros(6);
        for _ in 0..trials {
            let obs = simulate_training(&h, &pattern, 1.0, 0.01, &mut rng).unwrap();
            let est = estimator.estimate_channel(&obs).unwrap();
            for (s, e) in sum.iter_mut().zip(est.iter()) {
                *s += e;
            }
        }
        let mean = sum.scale(C64::new(1.0 / trials as f64, 0.0));
        // per-component standard error is sqrt(R_mm σ²/P / trials)
        let r = estimator.r_p();
        for m in 0..6 {
            let se = (r[(m, m)].re * 0.01 / trials as f64).sqrt();
            assert!((mean[m] - h[m]).norm() < 5.0 * se, "component {m}");
        }
    }

    #[test]
    fn empirical_converges_to_analytic_for_each_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for (m, bits) in [(2, 1), (4, 2), (9, 1), (6, 3)] {
            let pattern = design_pattern(m, PhaseShiftSet::new(bits).unwrap());
            let h = random_channel(m + 1, &mut rng);
            let analytic = pattern_mse(&pattern, 1.0, 0.01).unwrap();
            let trials = 5_000;
            let emp = empirical_mse(&h, &pattern, 1.0, 0.01, trials, &mut rng).unwrap();
            // ‖h_e‖² has variance tr(C²) for complex Gaussian errors
            let cov = LsEstimator::new(&pattern, 1.0, 0.01).unwrap().covariance();
            let var = (&cov * &cov).trace().re;
            let se = (var / trials as f64).sqrt();
            assert!((emp - analytic).abs() < 3.0 * se + 1e-12, "M={m} b={bits}: {emp} vs {analytic}");
        }
    }

    #[test]
    fn singular_pattern_is_rejected() {
        let q = crate::training::quantized_dft_pattern(2, PhaseShiftSet::new(1).unwrap());
        assert!(matches!(LsEstimator::new(&q, 1.0, 1.0), Err(Error::SingularMatrix { .. })));
    }
}
