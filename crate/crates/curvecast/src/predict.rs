//! Predictions from a fitted curve: accuracy at a size, size for a target
//! accuracy, plot-ready curve samples, and bootstrap uncertainty.
//!
//! The bootstrap resamples replicates with replacement *within* each size
//! group (the experimental design is fixed; sizes are never resampled),
//! refits every resample through the same weighting pipeline, and reports
//! 2.5/97.5 percentile intervals. Replicate `b` draws from ChaCha8 stream `b`
//! of the caller's seed, which makes the report a pure function of
//! `(inputs, seed)` and lets the refits run in parallel without changing the
//! result.

use crate::fit::{fit, FitError, FitOptions, FitResult};
use crate::model::ModelError;
use crate::observations::{
    materialize_weights, DataError, ObservationSet, SizeGroup, WeightScheme,
};
use crate::synth::median;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("bootstrap replicate count must be >= 1")]
    NoBootstrapReplicates,
    #[error("all {0} bootstrap refits failed")]
    BootstrapFailed(usize),
    #[error("curve sampling needs 0 < x_min < x_max and n_points >= 2")]
    BadCurveRange,
}

/// Model accuracy at size `x`, clamped into the reportable [0, 100] band.
pub fn predict_accuracy(fit: &FitResult, x: f64) -> Result<f64, ModelError> {
    Ok(fit.params.eval(x)?.clamp(0.0, 100.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionStatus {
    Ok,
    /// The curve reaches the target below a single training sample.
    SubUnitSize,
}

/// The size required to reach a target accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct SizePrediction {
    pub target_accuracy: f64,
    pub required_size_real: f64,
    /// Ceiling of the real solution; samples are discrete.
    pub required_size: u64,
    /// Bootstrap percentile interval, when one was computed.
    pub interval: Option<(u64, u64)>,
    pub status: PredictionStatus,
}

/// Inverts the fitted curve for `target`; see [`SizePrediction`].
///
/// A real solution within 1e-9 relative of an integer is treated as that
/// integer before the ceiling is taken, so round-off in the fitted
/// parameters cannot bump the reported size to the next sample.
pub fn required_size(fit: &FitResult, target: f64) -> Result<SizePrediction, ModelError> {
    let solved = fit.params.invert_for_size(target)?;
    let real = snap_to_integer(solved.size);
    Ok(SizePrediction {
        target_accuracy: target,
        required_size_real: real,
        required_size: real.ceil().max(0.0) as u64,
        interval: None,
        status: if solved.sub_unit {
            PredictionStatus::SubUnitSize
        } else {
            PredictionStatus::Ok
        },
    })
}

fn snap_to_integer(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest
    } else {
        x
    }
}

/// `n_points` log-spaced `(x, clamped accuracy)` samples over
/// `[x_min, x_max]`, endpoints included.
pub fn sample_curve(
    fit: &FitResult,
    x_min: f64,
    x_max: f64,
    n_points: usize,
) -> Result<Vec<(f64, f64)>, PredictError> {
    if !(x_min > 0.0 && x_min < x_max && x_min.is_finite() && x_max.is_finite()) || n_points < 2 {
        return Err(PredictError::BadCurveRange);
    }
    let (lo, hi) = (x_min.ln(), x_max.ln());
    let mut samples = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let x = if i == 0 {
            x_min
        } else if i == n_points - 1 {
            x_max
        } else {
            (lo + (hi - lo) * i as f64 / (n_points - 1) as f64).exp()
        };
        samples.push((x, predict_accuracy(fit, x)?));
    }
    Ok(samples)
}

/// Percentile-bootstrap uncertainty for the fitted parameters and the
/// required size at one target.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapReport {
    /// Number of bootstrap replicates (B).
    pub replicates: usize,
    pub seed: u64,
    pub b1_interval: (f64, f64),
    pub b2_interval: (f64, f64),
    pub size_interval_real: (f64, f64),
    /// Ceilings of the real interval ends.
    pub size_interval: (u64, u64),
    pub failed_refits: usize,
    /// Set when the full-data point estimate falls outside the size interval,
    /// which only happens under degenerate resampling.
    pub point_outside_interval: bool,
}

/// Runs the bootstrap with parallel refits. Identical to
/// [`bootstrap_sequential`] by construction.
pub fn bootstrap(
    obs: &ObservationSet,
    scheme: &WeightScheme,
    options: &FitOptions,
    target: f64,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapReport, PredictError> {
    let outcomes: Vec<Option<(f64, f64, f64)>> = (0..replicates as u64)
        .into_par_iter()
        .map(|index| refit_resample(obs, scheme, options, target, seed, index))
        .collect();
    assemble_report(obs, scheme, options, target, replicates, seed, outcomes)
}

/// Single-threaded twin of [`bootstrap`], kept as the reference execution
/// order for the determinism contract.
pub fn bootstrap_sequential(
    obs: &ObservationSet,
    scheme: &WeightScheme,
    options: &FitOptions,
    target: f64,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapReport, PredictError> {
    let outcomes: Vec<Option<(f64, f64, f64)>> = (0..replicates as u64)
        .map(|index| refit_resample(obs, scheme, options, target, seed, index))
        .collect();
    assemble_report(obs, scheme, options, target, replicates, seed, outcomes)
}

/// One bootstrap replicate: resample within groups on stream `index`, rerun
/// weighting and fitting, invert for the target.
fn refit_resample(
    obs: &ObservationSet,
    scheme: &WeightScheme,
    options: &FitOptions,
    target: f64,
    seed: u64,
    index: u64,
) -> Option<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);

    let groups = obs
        .groups()
        .iter()
        .map(|group| SizeGroup {
            size: group.size,
            class_label: group.class_label.clone(),
            replicates: (0..group.replicates.len())
                .map(|_| group.replicates[rng.random_range(0..group.replicates.len())])
                .collect(),
        })
        .collect();
    let resampled = ObservationSet::new(groups).ok()?;

    let (weights, _) = materialize_weights(&resampled, scheme, true).ok()?;
    let refit = fit(&resampled.replicate_pairs(), &weights, options).ok()?;
    let size = refit.params.invert_for_size(target).ok()?.size;
    Some((refit.params.b1(), refit.params.b2(), size))
}

fn assemble_report(
    obs: &ObservationSet,
    scheme: &WeightScheme,
    options: &FitOptions,
    target: f64,
    replicates: usize,
    seed: u64,
    outcomes: Vec<Option<(f64, f64, f64)>>,
) -> Result<BootstrapReport, PredictError> {
    if replicates == 0 {
        return Err(PredictError::NoBootstrapReplicates);
    }
    let successes: Vec<(f64, f64, f64)> = outcomes.into_iter().flatten().collect();
    let failed_refits = replicates - successes.len();
    if successes.is_empty() {
        return Err(PredictError::BootstrapFailed(replicates));
    }

    let collect =
        |pick: fn(&(f64, f64, f64)) -> f64| -> Vec<f64> { successes.iter().map(pick).collect() };
    let b1_interval = percentile_interval(&collect(|s| s.0));
    let b2_interval = percentile_interval(&collect(|s| s.1));
    let size_interval_real = percentile_interval(&collect(|s| s.2));

    // Point estimate from the full data, for the degeneracy flag.
    let (weights, _) = materialize_weights(obs, scheme, true)?;
    let full_fit = fit(&obs.replicate_pairs(), &weights, options)?;
    let point = full_fit.params.invert_for_size(target)?.size;

    Ok(BootstrapReport {
        replicates,
        seed,
        b1_interval,
        b2_interval,
        size_interval: (
            snap_to_integer(size_interval_real.0).ceil().max(0.0) as u64,
            snap_to_integer(size_interval_real.1).ceil().max(0.0) as u64,
        ),
        point_outside_interval: point < size_interval_real.0 || point > size_interval_real.1,
        size_interval_real,
        failed_refits,
    })
}

/// 2.5th and 97.5th empirical percentiles with linear interpolation between
/// order statistics.
fn percentile_interval(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (quantile(&sorted, 0.025), quantile(&sorted, 0.975))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let low = rank.floor() as usize;
    let high = rank.ceil() as usize;
    if low == high {
        sorted[low]
    } else {
        sorted[low] + (sorted[high] - sorted[low]) * (rank - low as f64)
    }
}

/// Median bootstrap interval width for b2 over `seeds` reruns of a synthetic
/// experiment; used to study how uncertainty tightens with replication.
pub fn median_b2_width(
    make_obs: impl Fn(u64) -> ObservationSet,
    scheme: &WeightScheme,
    options: &FitOptions,
    target: f64,
    replicates: usize,
    seeds: std::ops::Range<u64>,
) -> Result<f64, PredictError> {
    let widths: Vec<f64> = seeds
        .map(|seed| {
            let obs = make_obs(seed);
            bootstrap(&obs, scheme, options, target, replicates, seed)
                .map(|r| r.b2_interval.1 - r.b2_interval.0)
        })
        .collect::<Result<_, _>>()?;
    Ok(median(&widths))
}
