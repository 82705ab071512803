//! Synthetic replicated experiments from a known ground-truth curve.
//!
//! Stands in for the real train-and-test pipeline: every observation is the
//! true curve value plus Gaussian noise whose standard deviation shrinks with
//! training size, `sigma(x) = a * x^(-c)`, then truncated into [0, 100] by
//! clamping.
//!
//! # Reproducibility
//!
//! All randomness comes from the ChaCha8 generator (`rand_chacha` crate),
//! seeded with the spec's 64-bit seed. Draws happen in a fixed order: sizes
//! ascending, replicate index ascending, one standard-normal draw per
//! replicate. Batch runs derive the seed for trial `t` as
//! `splitmix64(seed + (t + 1) * 0x9E3779B97F4A7C15)`, so any trial can be
//! reproduced in isolation.

use crate::fit::{fit, FitError, FitOptions};
use crate::model::{CurveParams, ModelError};
use crate::observations::{
    materialize_weights, DataError, ObservationSet, SizeGroup, WeightScheme,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("sizes must be nonempty and unique")]
    BadSizes,
    #[error("{name} must be finite and >= 0, got {value}")]
    BadNoise { name: &'static str, value: f64 },
    #[error("replicates_per_size must be >= 1")]
    NoReplicates,
    #[error("trials must be >= 1")]
    NoTrials,
    #[error("every trial failed to fit")]
    AllTrialsFailed,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Everything needed to generate one synthetic experiment.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub truth: CurveParams,
    pub sizes: Vec<u64>,
    pub replicates_per_size: usize,
    /// Noise scale `a` in accuracy percent; zero means exact curve values.
    pub noise_scale: f64,
    /// Noise exponent `c`; the replicate standard deviation at size `x` is
    /// `a * x^(-c)`.
    pub noise_exponent: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(truth: CurveParams, sizes: Vec<u64>, seed: u64) -> Self {
        Self {
            truth,
            sizes,
            replicates_per_size: 10,
            noise_scale: 0.0,
            noise_exponent: 0.0,
            seed,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let mut sorted = self.sizes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if self.sizes.is_empty() || sorted.len() != self.sizes.len() || sorted[0] == 0 {
            return Err(SynthError::BadSizes);
        }
        for (name, value) in [
            ("noise_scale", self.noise_scale),
            ("noise_exponent", self.noise_exponent),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(SynthError::BadNoise { name, value });
            }
        }
        if self.replicates_per_size == 0 {
            return Err(SynthError::NoReplicates);
        }
        Ok(())
    }

    /// Replicate noise standard deviation at size `x`.
    pub fn sigma(&self, x: f64) -> f64 {
        self.noise_scale * x.powf(-self.noise_exponent)
    }
}

/// Draws one full experiment. Deterministic for a fixed spec.
pub fn generate(spec: &SynthSpec) -> Result<ObservationSet, SynthError> {
    spec.validate()?;
    let mut sizes = spec.sizes.clone();
    sizes.sort_unstable();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut groups = Vec::with_capacity(sizes.len());
    for size in sizes {
        let x = size as f64;
        let level = spec.truth.eval(x)?;
        let sigma = spec.sigma(x);
        let replicates = (0..spec.replicates_per_size)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (level + sigma * z).clamp(0.0, 100.0)
            })
            .collect();
        groups.push(SizeGroup {
            size,
            replicates,
            class_label: None,
        });
    }
    Ok(ObservationSet::new(groups)?)
}

/// Per-trial parameter errors from repeated generate -> weight -> fit runs.
#[derive(Debug, Clone)]
pub struct RecoverySummary {
    /// `(b1_hat - b1, b2_hat - b2)` for each trial that fit successfully.
    pub errors: Vec<(f64, f64)>,
    pub median_error: (f64, f64),
    /// Median absolute deviation around the median, per parameter.
    pub mad: (f64, f64),
    pub failures: usize,
}

/// Runs `trials` independent synthetic experiments and fits each one.
///
/// Individual fit failures are counted, never fatal. Fits run on the flat
/// replicate pairs with the scheme's weights expanded per replicate.
pub fn recovery_experiment(
    spec: &SynthSpec,
    scheme: &WeightScheme,
    options: &FitOptions,
    trials: usize,
) -> Result<RecoverySummary, SynthError> {
    if trials == 0 {
        return Err(SynthError::NoTrials);
    }
    spec.validate()?;

    let mut errors = Vec::with_capacity(trials);
    let mut failures = 0usize;
    for trial in 0..trials {
        let mut trial_spec = spec.clone();
        trial_spec.seed = trial_seed(spec.seed, trial);
        match run_trial(&trial_spec, scheme, options) {
            Ok((b1_err, b2_err)) => errors.push((b1_err, b2_err)),
            Err(_) => failures += 1,
        }
    }
    if errors.is_empty() {
        return Err(SynthError::AllTrialsFailed);
    }

    let b1_errors: Vec<f64> = errors.iter().map(|e| e.0).collect();
    let b2_errors: Vec<f64> = errors.iter().map(|e| e.1).collect();
    Ok(RecoverySummary {
        median_error: (median(&b1_errors), median(&b2_errors)),
        mad: (mad(&b1_errors), mad(&b2_errors)),
        errors,
        failures,
    })
}

fn run_trial(
    spec: &SynthSpec,
    scheme: &WeightScheme,
    options: &FitOptions,
) -> Result<(f64, f64), SynthError> {
    let obs = generate(spec)?;
    let (weights, _) = materialize_weights(&obs, scheme, true)?;
    let result = fit(&obs.replicate_pairs(), &weights, options).map_err(SynthError::from)?;
    Ok((
        result.params.b1() - spec.truth.b1(),
        result.params.b2() - spec.truth.b2(),
    ))
}

impl From<FitError> for SynthError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Model(m) => SynthError::Model(m),
            other => SynthError::Data(DataError::Row {
                line: 0,
                message: other.to_string(),
            }),
        }
    }
}

/// Deterministic per-trial seed: splitmix64 of the base seed offset by the
/// golden-ratio increment, so trials are independent and order-free.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    splitmix64(seed.wrapping_add((trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    let deviations: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&deviations)
}
