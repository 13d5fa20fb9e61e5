//! Seeded Monte-Carlo experiments: MSE versus number of groups, rate
//! versus number of groups and rate versus number of elements.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::{
    self, achievable_rate, channel_gain_beam, exhaustive_beam_search, rotate_and_quantize, sdr_initialization,
    successive_refinement, BeamformingProblem, ReflectionVector,
};
use crate::channel::{group_channels, sample_channels, Geometry};
use crate::error::{Error, Result};
use crate::estimation::{simulate_training_with_noise, training_noise, LsEstimator};
use crate::linalg::ComplexVector;
use crate::training::{design_pattern, naive_pattern, pattern_mse, PhaseShiftSet, ReflectionPattern};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Designed training pattern, SDR initialization and successive refinement.
    Proposed,
    /// Naive training pattern with the proposed beamforming.
    Naive,
    /// Best of `M+1` random discrete vectors, no LS estimate of the extended channel.
    RandomPhase,
    /// Continuous-phase SDR solution.
    UpperBound,
    Exhaustive,
    /// SDR solution rotated and quantized, no refinement.
    Quantization,
    ChannelGain,
    /// `σ²/P_t`, only in the MSE sweep.
    LowerBound,
}

impl Scheme {
    pub fn id(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Naive => "naive",
            Scheme::RandomPhase => "random-phase",
            Scheme::UpperBound => "upper-bound",
            Scheme::Exhaustive => "exhaustive",
            Scheme::Quantization => "quantization",
            Scheme::ChannelGain => "channel-gain",
            Scheme::LowerBound => "lower-bound",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// How the random-phase benchmark picks among its candidates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomPhaseSelection {
    /// Largest rate computed from each candidate's noisy pilot, which ranks
    /// candidates by received pilot power.
    #[default]
    Estimated,
    /// Largest rate under the true channel.
    Genie,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MseSweep,
    RateVsGroups,
    RateVsElements,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::MseSweep => "mse-sweep",
            Experiment::RateVsGroups => "rate-vs-groups",
            Experiment::RateVsElements => "rate-vs-elements",
        }
    }
}

fn default_samples() -> usize {
    beamforming::DEFAULT_RANDOMIZATION_SAMPLES
}

fn default_eps() -> f64 {
    beamforming::DEFAULT_REFINE_EPS
}

fn default_sdp_tol() -> f64 {
    beamforming::DEFAULT_SDP_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub geometry: Geometry,
    pub n_elements: Vec<usize>,
    pub m_groups: Vec<usize>,
    pub bits: Vec<u32>,
    pub pt_dbm: f64,
    pub sigma2_dbm: f64,
    pub gap_db: f64,
    pub t0: usize,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_samples")]
    pub randomization_samples: usize,
    #[serde(default = "default_eps")]
    pub refine_eps: f64,
    #[serde(default = "default_sdp_tol")]
    pub sdp_tol: f64,
    #[serde(default)]
    pub random_phase_selection: RandomPhaseSelection,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl ExperimentConfig {
    fn base() -> Self {
        Self {
            geometry: Geometry::default(),
            n_elements: vec![80],
            m_groups: vec![4],
            bits: vec![1, 2],
            pt_dbm: 20.0,
            sigma2_dbm: -79.0,
            gap_db: 8.2,
            t0: 40,
            trials: 500,
            seed: 2020,
            schemes: vec![Scheme::Proposed],
            randomization_samples: default_samples(),
            refine_eps: default_eps(),
            sdp_tol: default_sdp_tol(),
            random_phase_selection: RandomPhaseSelection::default(),
        }
    }

    /// MSE versus `M` at `P_t/σ² = 30 dB`.
    pub fn mse_defaults() -> Self {
        Self {
            m_groups: (1..=33).collect(),
            sigma2_dbm: -10.0,
            trials: 1,
            schemes: vec![Scheme::Proposed, Scheme::Naive, Scheme::LowerBound],
            ..Self::base()
        }
    }

    /// Rate versus `M` at `N = 80`.
    pub fn groups_defaults() -> Self {
        Self {
            m_groups: vec![1, 2, 4, 5, 8, 10, 16, 20],
            schemes: vec![Scheme::Proposed, Scheme::Naive, Scheme::RandomPhase],
            ..Self::base()
        }
    }

    /// Rate versus `N` at `M = 4`.
    pub fn elements_defaults() -> Self {
        Self {
            n_elements: (1..=10).map(|k| 8 * k).collect(),
            schemes: vec![
                Scheme::UpperBound,
                Scheme::Exhaustive,
                Scheme::Proposed,
                Scheme::Quantization,
                Scheme::ChannelGain,
                Scheme::RandomPhase,
            ],
            ..Self::base()
        }
    }

    pub fn defaults_for(experiment: Experiment) -> Self {
        match experiment {
            Experiment::MseSweep => Self::mse_defaults(),
            Experiment::RateVsGroups => Self::groups_defaults(),
            Experiment::RateVsElements => Self::elements_defaults(),
        }
    }

    pub fn pt(&self) -> f64 {
        dbm_to_watts(self.pt_dbm)
    }

    pub fn sigma2(&self) -> f64 {
        dbm_to_watts(self.sigma2_dbm)
    }

    pub fn phase_sets(&self) -> Result<Vec<PhaseShiftSet>> {
        self.bits.iter().map(|&b| PhaseShiftSet::new(b)).collect()
    }

    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m_groups.is_empty() || self.bits.is_empty() || self.schemes.is_empty() {
            return bad("m_groups, bits and schemes must be nonempty".into());
        }
        if self.m_groups.contains(&0) {
            return bad("every group count must be at least 1".into());
        }
        self.phase_sets()?;
        self.geometry.validate()?;
        if !self.pt_dbm.is_finite() || !self.sigma2_dbm.is_finite() || !self.gap_db.is_finite() {
            return bad("power levels must be finite".into());
        }
        let rate_only = [
            Scheme::RandomPhase,
            Scheme::UpperBound,
            Scheme::Exhaustive,
            Scheme::Quantization,
            Scheme::ChannelGain,
        ];
        if experiment == Experiment::MseSweep {
            if let Some(s) = self.schemes.iter().find(|s| rate_only.contains(s)) {
                return bad(format!("scheme {s} has no MSE series"));
            }
            return Ok(());
        }
        if self.schemes.contains(&Scheme::LowerBound) {
            return bad("lower-bound is only defined for the MSE sweep".into());
        }
        if self.n_elements.is_empty() || self.n_elements.contains(&0) {
            return bad("n_elements must be nonempty and positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let max_m = *self.m_groups.iter().max().expect("nonempty");
        if self.t0 <= max_m + 1 {
            return bad(format!("t0 = {} must exceed M + 1 = {}", self.t0, max_m + 1));
        }
        for &n in &self.n_elements {
            for &m in &self.m_groups {
                if n % m != 0 {
                    return bad(format!("M = {m} does not divide N = {n}"));
                }
            }
        }
        if self.schemes.contains(&Scheme::Exhaustive) {
            let worst = max_m * *self.bits.iter().max().expect("nonempty") as usize;
            if worst > beamforming::EXHAUSTIVE_BEAM_LIMIT {
                return bad(format!(
                    "exhaustive search needs b·M ≤ {}, got {worst}",
                    beamforming::EXHAUSTIVE_BEAM_LIMIT
                ));
            }
        }
        if self.randomization_samples == 0 {
            return bad("randomization_samples must be at least 1".into());
        }
        if !(self.refine_eps > 0.0) {
            return bad("refine_eps must be positive".into());
        }
        if !(1e-10..=1e-4).contains(&self.sdp_tol) {
            return bad("sdp_tol must lie in [1e-10, 1e-4]".into());
        }
        Ok(())
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub experiment: String,
    pub scheme: Scheme,
    pub b: Option<u32>,
    pub sweep_param: String,
    pub sweep_value: usize,
    #[serde(rename = "mean_rate_bps_hz")]
    pub mean_rate: Option<f64>,
    pub mean_mse: Option<f64>,
    pub stderr: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

pub fn write_csv<W: Write>(rows: &[SchemeResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::InvalidConfig(format!("CSV output: {e}")))?;
    }
    w.flush().map_err(|e| Error::InvalidConfig(format!("CSV output: {e}")))?;
    Ok(())
}

pub fn to_csv_string(rows: &[SchemeResult]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Analytic MSE of the designed and naive patterns and the lower bound.
pub fn mse_sweep(config: &ExperimentConfig) -> Result<Vec<SchemeResult>> {
    config.validate(Experiment::MseSweep)?;
    let (pt, sigma2) = (config.pt(), config.sigma2());
    let sets = config.phase_sets()?;
    let mut rows = Vec::new();
    for &m in &config.m_groups {
        for &scheme in &config.schemes {
            let row = |b: Option<u32>, mse: f64| SchemeResult {
                experiment: Experiment::MseSweep.id().into(),
                scheme,
                b,
                sweep_param: "M".into(),
                sweep_value: m,
                mean_rate: None,
                mean_mse: Some(mse),
                stderr: None,
                trials: 0,
                seed: config.seed,
            };
            match scheme {
                Scheme::Proposed => {
                    for set in &sets {
                        rows.push(row(Some(set.bits()), pattern_mse(&design_pattern(m, *set), pt, sigma2)?));
                    }
                }
                Scheme::Naive => rows.push(row(None, pattern_mse(&naive_pattern(m), pt, sigma2)?)),
                Scheme::LowerBound => rows.push(row(None, sigma2 / pt)),
                other => return Err(Error::InvalidConfig(format!("scheme {other} has no MSE series"))),
            }
        }
    }
    Ok(rows)
}

/// Rate and realized estimation error of one scheme in one trial; `None`
/// marks a scheme that failed or does not estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub bits: u32,
    pub rate: Option<f64>,
    pub mse: Option<f64>,
    pub sinr: Option<f64>,
}

/// Deterministic inputs shared by every trial at one sweep point.
struct PointSetup {
    n: usize,
    m: usize,
    sets: Vec<PhaseShiftSet>,
    designed: Vec<(ReflectionPattern, LsEstimator)>,
    naive: (ReflectionPattern, LsEstimator),
}

impl PointSetup {
    fn new(config: &ExperimentConfig, n: usize, m: usize) -> Result<Self> {
        let (pt, sigma2) = (config.pt(), config.sigma2());
        let sets = config.phase_sets()?;
        let designed = sets
            .iter()
            .map(|&set| {
                let p = design_pattern(m, set);
                let e = LsEstimator::new(&p, pt, sigma2)?;
                Ok((p, e))
            })
            .collect::<Result<Vec<_>>>()?;
        let naive = naive_pattern(m);
        let naive_est = LsEstimator::new(&naive, pt, sigma2)?;
        Ok(Self {
            n,
            m,
            sets,
            designed,
            naive: (naive, naive_est),
        })
    }
}

/// Per-trial generator: the configured seed selects the key and the trial
/// index selects the stream, so a trial sees the same draws at every sweep
/// point.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn true_sinr(theta: &ReflectionVector, h: &ComplexVector, r_p: &crate::linalg::ComplexMatrix, pt: f64, sigma2: f64) -> f64 {
    let signal = theta.theta().inner(h).norm_sqr();
    pt * signal / (sigma2 * (r_p.quad_form(theta.theta()) + 1.0))
}

fn estimation_error(h_est: &ComplexVector, h: &ComplexVector) -> f64 {
    h_est.iter().zip(h.iter()).map(|(a, b)| (a - b).norm_sqr()).sum()
}

/// `M+1` random discrete vectors with the first entry fixed to 1, one per
/// training symbol. Each candidate's effective channel is estimated from its
/// own pilot, so the kept vector pays the same error interference as a
/// single-pilot LS estimate: `P_t|θ^H h|² / (2σ²)`.
pub fn random_phase_scheme(
    h_true: &ComplexVector,
    config: &ExperimentConfig,
    m: usize,
    phase_set: PhaseShiftSet,
    rng: &mut impl Rng,
) -> Result<f64> {
    let (pt, sigma2) = (config.pt(), config.sigma2());
    let k = phase_set.levels();
    let candidates: Vec<ReflectionVector> = (0..=m)
        .map(|_| {
            let levels: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
            ReflectionVector::from_levels(&levels, phase_set)
        })
        .collect();
    let noise = training_noise(m + 1, sigma2, rng);
    let gains: Vec<f64> = candidates.iter().map(|c| c.theta().inner(h_true).norm_sqr()).collect();
    let pick = match config.random_phase_selection {
        RandomPhaseSelection::Genie => argmax(&gains),
        RandomPhaseSelection::Estimated => {
            let estimated: Vec<f64> = candidates
                .iter()
                .zip(noise.iter())
                .map(|(c, z)| (c.theta().inner(h_true) + z / pt.sqrt()).norm_sqr())
                .collect();
            argmax(&estimated)
        }
    };
    achievable_rate(pt * gains[pick] / (2.0 * sigma2), m, config.t0, config.gap_db)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// One fading realization at `(N, M)`: every configured scheme for every
/// configured resolution.
pub fn run_trial(config: &ExperimentConfig, n: usize, m: usize, trial: usize) -> Result<Vec<SchemeOutcome>> {
    config.validate(Experiment::RateVsGroups)?;
    let setup = PointSetup::new(config, n, m)?;
    Ok(trial_outcomes(config, &setup, trial))
}

fn trial_outcomes(config: &ExperimentConfig, setup: &PointSetup, trial: usize) -> Vec<SchemeOutcome> {
    let (pt, sigma2) = (config.pt(), config.sigma2());
    let (n, m) = (setup.n, setup.m);
    let mut rng = trial_rng(config.seed, trial);
    let elements = sample_channels(&config.geometry, n, &mut rng);
    let h = group_channels(&elements, m).expect("grouping validated").h_ext;
    let noise = training_noise(m + 1, sigma2, &mut rng);
    // independent child streams so adding a scheme leaves the others unchanged
    let child_seeds: Vec<[u64; 3]> = setup
        .sets
        .iter()
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();

    let rate = |gamma: f64| achievable_rate(gamma, m, config.t0, config.gap_db).ok();
    let mut out = Vec::new();
    for (idx, &set) in setup.sets.iter().enumerate() {
        let bits = set.bits();
        let record = |scheme, rate: Option<f64>, mse: Option<f64>, sinr: Option<f64>| SchemeOutcome {
            scheme,
            bits,
            rate,
            mse,
            sinr,
        };
        let failed = |scheme| record(scheme, None, None, None);

        let estimate = |(pattern, est): &(ReflectionPattern, LsEstimator)| -> Result<BeamformingProblem> {
            let obs = simulate_training_with_noise(&h, pattern, pt, &noise)?;
            let h_est = est.estimate_channel(&obs)?;
            BeamformingProblem::new(h_est, est.r_p().clone(), pt, sigma2)
        };
        let designed = estimate(&setup.designed[idx]);
        let needs_sdr = config
            .schemes
            .iter()
            .any(|s| matches!(s, Scheme::Proposed | Scheme::UpperBound | Scheme::Quantization));
        let mut sdr_rng = ChaCha8Rng::seed_from_u64(child_seeds[idx][0]);
        let init = match (&designed, needs_sdr) {
            (Ok(prob), true) => Some(sdr_initialization(
                prob,
                config.randomization_samples,
                config.sdp_tol,
                &mut sdr_rng,
            )),
            _ => None,
        };

        for &scheme in &config.schemes {
            let evaluate = |prob: &BeamformingProblem, theta: &ReflectionVector| {
                let gamma = true_sinr(theta, &h, &prob.r_p, pt, sigma2);
                record(
                    scheme,
                    rate(gamma),
                    Some(estimation_error(&prob.h_tilde, &h)),
                    Some(gamma),
                )
            };
            let outcome = match scheme {
                Scheme::Proposed | Scheme::Quantization | Scheme::UpperBound => {
                    match (&designed, &init) {
                        (Ok(prob), Some(Ok(init))) => {
                            let quantized = rotate_and_quantize(&init.continuous, set);
                            match scheme {
                                Scheme::UpperBound => evaluate(prob, &init.continuous),
                                Scheme::Quantization => evaluate(prob, &quantized),
                                _ => match successive_refinement(&quantized, prob, set, config.refine_eps) {
                                    Ok(theta) => evaluate(prob, &theta),
                                    Err(_) => failed(scheme),
                                },
                            }
                        }
                        _ => failed(scheme),
                    }
                }
                Scheme::Exhaustive => match &designed {
                    Ok(prob) => match exhaustive_beam_search(prob, set) {
                        Ok(theta) => evaluate(prob, &theta),
                        Err(_) => failed(scheme),
                    },
                    Err(_) => failed(scheme),
                },
                Scheme::ChannelGain => match &designed {
                    Ok(prob) => evaluate(prob, &channel_gain_beam(prob, set, config.refine_eps)),
                    Err(_) => failed(scheme),
                },
                Scheme::Naive => {
                    let mut naive_rng = ChaCha8Rng::seed_from_u64(child_seeds[idx][1]);
                    let theta = estimate(&setup.naive).and_then(|prob| {
                        let init =
                            sdr_initialization(&prob, config.randomization_samples, config.sdp_tol, &mut naive_rng)?;
                        let q = rotate_and_quantize(&init.continuous, set);
                        Ok((successive_refinement(&q, &prob, set, config.refine_eps)?, prob))
                    });
                    match theta {
                        Ok((theta, prob)) => evaluate(&prob, &theta),
                        Err(_) => failed(scheme),
                    }
                }
                Scheme::RandomPhase => {
                    let mut rp_rng = ChaCha8Rng::seed_from_u64(child_seeds[idx][2]);
                    record(scheme, random_phase_scheme(&h, config, m, set, &mut rp_rng).ok(), None, None)
                }
                Scheme::LowerBound => failed(scheme),
            };
            out.push(outcome);
        }
    }
    out
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stderr = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Some((mean, stderr))
}

fn rate_sweep(config: &ExperimentConfig, experiment: Experiment) -> Result<Vec<SchemeResult>> {
    config.validate(experiment)?;
    let points: Vec<(usize, usize, usize)> = match experiment {
        Experiment::RateVsGroups => config
            .n_elements
            .iter()
            .flat_map(|&n| config.m_groups.iter().map(move |&m| (n, m, m)))
            .collect(),
        _ => config
            .m_groups
            .iter()
            .flat_map(|&m| config.n_elements.iter().map(move |&n| (n, m, n)))
            .collect(),
    };
    let sweep_param = if experiment == Experiment::RateVsGroups { "M" } else { "N" };
    let mut rows = Vec::new();
    for (n, m, value) in points {
        let setup = PointSetup::new(config, n, m)?;
        let trials: Vec<Vec<SchemeOutcome>> = (0..config.trials)
            .into_par_iter()
            .map(|t| trial_outcomes(config, &setup, t))
            .collect();
        let per_trial = trials.first().map_or(0, Vec::len);
        for slot in 0..per_trial {
            let first = trials[0][slot];
            let rates: Vec<f64> = trials.iter().filter_map(|t| t[slot].rate).collect();
            let mses: Vec<f64> = trials.iter().filter_map(|t| t[slot].mse).collect();
            let stats = mean_and_stderr(&rates);
            rows.push(SchemeResult {
                experiment: experiment.id().into(),
                scheme: first.scheme,
                b: Some(first.bits),
                sweep_param: sweep_param.into(),
                sweep_value: value,
                mean_rate: stats.map(|s| s.0),
                mean_mse: mean_and_stderr(&mses).map(|s| s.0),
                stderr: stats.map(|s| s.1),
                trials: rates.len(),
                seed: config.seed,
            });
        }
    }
    Ok(rows)
}

/// Mean rate versus number of groups `M`.
pub fn rate_vs_groups(config: &ExperimentConfig) -> Result<Vec<SchemeResult>> {
    rate_sweep(config, Experiment::RateVsGroups)
}

/// Mean rate versus number of elements `N`.
pub fn rate_vs_elements(config: &ExperimentConfig) -> Result<Vec<SchemeResult>> {
    rate_sweep(config, Experiment::RateVsElements)
}

pub fn run(experiment: Experiment, config: &ExperimentConfig) -> Result<Vec<SchemeResult>> {
    match experiment {
        Experiment::MseSweep => mse_sweep(config),
        Experiment::RateVsGroups => rate_vs_groups(config),
        Experiment::RateVsElements => rate_vs_elements(config),
    }
}
