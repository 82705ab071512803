//! Weighted nonlinear least-squares fitting of the learning curve.
//!
//! The objective is `E(b) = sum_p w_p * (t_p - y(x_p; b))^2`, minimized over
//! the curve parameters by a damped Gauss-Newton (Levenberg-Marquardt)
//! iteration. The solver works in the transformed variables
//! `theta = (ln(-b1), ln(-b2))`, which keeps every iterate inside the valid
//! sign region (`b1 < 0`, `b2 < 0`) without clamping and with smooth
//! derivatives via the chain rule.
//!
//! [`grid_search_fit`] is a brute-force minimizer over the same objective.
//! It never touches the Jacobian or the normal equations, so it serves as an
//! independent oracle for [`fit`] in tests.

use crate::model::{CurveParams, ModelError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("{observations} observations but {weights} weights")]
    LengthMismatch { observations: usize, weights: usize },
    #[error("weight at index {index} must be a positive finite value, got {value}")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("observation at index {index} is invalid: {reason}")]
    BadObservation { index: usize, reason: String },
    #[error("all per-size mean accuracies are at the asymptote; the curve is flat")]
    FlatData,
    #[error("need at least {needed} distinct sizes below the asymptote, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("invalid fit options: {0}")]
    BadOptions(String),
    #[error("parameter range must satisfy low <= high < 0, got [{low}, {high}]")]
    BadRange { low: f64, high: f64 },
    #[error("grid must have at least 10 steps per axis, got {0}")]
    GridTooCoarse(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Solver settings. The defaults are sensible for accuracy-percent data.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged when the relative SSE decrease between accepted steps falls
    /// below this.
    pub relative_sse_tolerance: f64,
    pub initial_damping: f64,
    /// Damping multiplier after a rejected step.
    pub damping_increase: f64,
    /// Damping multiplier after an accepted step.
    pub damping_decrease: f64,
    /// Starting point; when absent, [`default_init`] supplies one.
    pub initial_params: Option<CurveParams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            relative_sse_tolerance: 1e-10,
            initial_damping: 1e-3,
            damping_increase: 10.0,
            damping_decrease: 0.1,
            initial_params: None,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<(), FitError> {
        let positive = [
            ("relative_sse_tolerance", self.relative_sse_tolerance),
            ("initial_damping", self.initial_damping),
            ("damping_increase", self.damping_increase),
            ("damping_decrease", self.damping_decrease),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(FitError::BadOptions(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.max_iterations == 0 {
            return Err(FitError::BadOptions("max_iterations must be > 0".into()));
        }
        if !(self.damping_decrease < 1.0 && self.damping_increase > 1.0) {
            return Err(FitError::BadOptions(
                "need damping_decrease < 1 < damping_increase".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a fit, with enough diagnostics to audit the run.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: CurveParams,
    /// Residuals `t_p - y(x_p)` in observation order, accuracy percent.
    pub residuals: Vec<f64>,
    /// `E(b)` at `params`.
    pub weighted_sse: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Set when the normal equations came close to singular at any iterate.
    pub condition_warning: bool,
    /// Weighted SSE after each accepted step, starting with the initial value.
    /// Nonincreasing by construction.
    pub accepted_sse: Vec<f64>,
}

fn validate_pairs(pairs: &[(f64, f64)], weights: &[f64]) -> Result<(), FitError> {
    if pairs.len() != weights.len() {
        return Err(FitError::LengthMismatch {
            observations: pairs.len(),
            weights: weights.len(),
        });
    }
    for (index, &(x, t)) in pairs.iter().enumerate() {
        if !x.is_finite() || x <= 0.0 {
            return Err(FitError::BadObservation {
                index,
                reason: format!("size {x} must be positive"),
            });
        }
        if !t.is_finite() {
            return Err(FitError::BadObservation {
                index,
                reason: format!("accuracy {t} is not finite"),
            });
        }
    }
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() || value <= 0.0 {
            return Err(FitError::NonPositiveWeight { index, value });
        }
    }
    Ok(())
}

/// The weighted objective `E(b) = sum_p w_p (t_p - y_p)^2`.
pub fn weighted_sse(
    params: CurveParams,
    pairs: &[(f64, f64)],
    weights: &[f64],
) -> Result<f64, FitError> {
    validate_pairs(pairs, weights)?;
    Ok(sse_unchecked(params, pairs, weights))
}

fn sse_unchecked(params: CurveParams, pairs: &[(f64, f64)], weights: &[f64]) -> f64 {
    pairs
        .iter()
        .zip(weights)
        .map(|(&(x, t), &w)| {
            let r = t - (crate::model::ASYMPTOTE + params.b1() * x.powf(params.b2()));
            w * r * r
        })
        .sum()
}

/// Per-size means of the observations, ascending in size.
fn size_means(pairs: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<(f64, f64)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut means = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i].0;
        let mut sum = 0.0;
        let mut n = 0usize;
        while i < sorted.len() && sorted[i].0 == x {
            sum += sorted[i].1;
            n += 1;
            i += 1;
        }
        means.push((x, sum / n as f64));
    }
    means
}

/// Starting point from ordinary least squares on the log-log deficit.
///
/// With `d_p = 100 - mean_p`, the model gives `ln d_p = ln(-b1) + b2 ln x_p`,
/// a straight line in `ln x`. Sizes whose mean sits exactly at 100 have no
/// defined deficit and are excluded here (they still participate in the fit
/// itself).
pub fn default_init(pairs: &[(f64, f64)]) -> Result<CurveParams, FitError> {
    let usable: Vec<(f64, f64)> = size_means(pairs)
        .into_iter()
        .filter(|&(_, mean)| mean < crate::model::ASYMPTOTE)
        .collect();
    if usable.is_empty() {
        return Err(FitError::FlatData);
    }
    if usable.len() < 2 {
        return Err(FitError::InsufficientData {
            needed: 2,
            found: usable.len(),
        });
    }

    let n = usable.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, mean) in &usable {
        let lx = x.ln();
        let ly = (crate::model::ASYMPTOTE - mean).ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 * sxx.abs().max(1.0) {
        // All usable sizes identical; cannot identify a slope.
        return Err(FitError::InsufficientData {
            needed: 2,
            found: 1,
        });
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;

    let b2 = slope.min(-1e-6);
    let b1 = (-intercept.exp()).min(-1e-9);
    Ok(CurveParams::new(b1, b2).expect("clamped parameters are valid"))
}

/// Sign-preserving transform used by the solver.
fn to_theta(params: CurveParams) -> [f64; 2] {
    [(-params.b1()).ln(), (-params.b2()).ln()]
}

fn from_theta(theta: [f64; 2]) -> CurveParams {
    // exp never returns a nonnegative b1/b2, so this cannot fail for finite
    // theta; overflowing theta yields -inf which new() rejects.
    CurveParams::new(-theta[0].exp(), -theta[1].exp())
        .unwrap_or_else(|_| CurveParams::new(-1e300, -1e300).expect("sentinel params"))
}

const DAMPING_CAP: f64 = 1e100;

/// Levenberg-Marquardt minimization of the weighted SSE.
///
/// Steps solve `(J'WJ + lambda * diag(J'WJ)) delta = J'W r` in theta space.
/// A step is accepted when it does not increase the objective; the damping
/// shrinks on success and grows on rejection. The accepted-SSE sequence is
/// therefore nonincreasing, and the result can never be worse than the
/// starting point.
pub fn fit(
    pairs: &[(f64, f64)],
    weights: &[f64],
    options: &FitOptions,
) -> Result<FitResult, FitError> {
    options.validate()?;
    validate_pairs(pairs, weights)?;
    let distinct = size_means(pairs).len();
    if distinct < 2 {
        return Err(FitError::InsufficientData {
            needed: 2,
            found: distinct,
        });
    }

    let init = match options.initial_params {
        Some(params) => params,
        None => default_init(pairs)?,
    };
    if init.b1() == 0.0 {
        // The log transform needs b1 strictly negative.
        return Err(FitError::FlatData);
    }

    let mut theta = to_theta(init);
    let mut sse = sse_unchecked(init, pairs, weights);
    let mut lambda = options.initial_damping;
    let mut accepted_sse = vec![sse];
    let mut converged = false;
    let mut condition_warning = false;
    let mut iterations_used = 0;

    for _ in 0..options.max_iterations {
        iterations_used += 1;
        let params = from_theta(theta);
        let (b1, b2) = (params.b1(), params.b2());

        // Normal equations in theta space. d y/d theta1 = b1 x^b2,
        // d y/d theta2 = b1 b2 x^b2 ln x.
        let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&(x, t), &w) in pairs.iter().zip(weights) {
            let pow = x.powf(b2);
            let j1 = b1 * pow;
            let j2 = b1 * b2 * pow * x.ln();
            let r = t - (crate::model::ASYMPTOTE + b1 * pow);
            a11 += w * j1 * j1;
            a12 += w * j1 * j2;
            a22 += w * j2 * j2;
            g1 += w * j1 * r;
            g2 += w * j2 * r;
        }

        let m11 = a11 * (1.0 + lambda);
        let m22 = a22 * (1.0 + lambda);
        let det = m11 * m22 - a12 * a12;
        let scale = (m11 * m22).abs().max(a12 * a12);
        if !det.is_finite() || det <= 1e-14 * scale {
            condition_warning = true;
            lambda = (lambda * options.damping_increase).min(DAMPING_CAP);
            continue;
        }

        let delta = [(g1 * m22 - g2 * a12) / det, (m11 * g2 - a12 * g1) / det];
        let candidate_theta = [theta[0] + delta[0], theta[1] + delta[1]];
        let candidate = from_theta(candidate_theta);
        let candidate_sse = sse_unchecked(candidate, pairs, weights);

        if candidate_sse.is_finite() && candidate_sse <= sse {
            let relative_decrease = (sse - candidate_sse) / sse.max(f64::MIN_POSITIVE);
            theta = candidate_theta;
            sse = candidate_sse;
            accepted_sse.push(sse);
            lambda *= options.damping_decrease;
            if relative_decrease < options.relative_sse_tolerance {
                converged = true;
                break;
            }
        } else {
            lambda = (lambda * options.damping_increase).min(DAMPING_CAP);
        }
    }

    let params = from_theta(theta);
    let residuals = pairs
        .iter()
        .map(|&(x, t)| t - (crate::model::ASYMPTOTE + params.b1() * x.powf(params.b2())))
        .collect();
    Ok(FitResult {
        params,
        residuals,
        weighted_sse: sse,
        iterations_used,
        converged,
        condition_warning,
        accepted_sse,
    })
}

/// Brute-force minimizer used as the independent test oracle for [`fit`].
///
/// Evaluates the objective on a `grid_steps` x `grid_steps` log-spaced grid
/// over the given (negative) parameter ranges, then polishes the best cell
/// with a derivative-free compass search confined to the ranges. Only
/// objective evaluations are used, so disagreement with [`fit`] cannot come
/// from a shared Jacobian or linear-algebra bug.
pub fn grid_search_fit(
    pairs: &[(f64, f64)],
    weights: &[f64],
    b1_range: (f64, f64),
    b2_range: (f64, f64),
    grid_steps: usize,
) -> Result<FitResult, FitError> {
    validate_pairs(pairs, weights)?;
    for &(low, high) in [&b1_range, &b2_range] {
        if !(low <= high && high < 0.0) || !low.is_finite() {
            return Err(FitError::BadRange { low, high });
        }
    }
    if grid_steps < 10 {
        return Err(FitError::GridTooCoarse(grid_steps));
    }

    // theta = ln(-b) reverses interval orientation: high |b| <- low b.
    let t1 = ((-b1_range.1).ln(), (-b1_range.0).ln());
    let t2 = ((-b2_range.1).ln(), (-b2_range.0).ln());
    let axis = |range: (f64, f64), i: usize| {
        range.0 + (range.1 - range.0) * i as f64 / (grid_steps - 1) as f64
    };

    let mut best_theta = [t1.0, t2.0];
    let mut best_sse = f64::INFINITY;
    for i in 0..grid_steps {
        for j in 0..grid_steps {
            let theta = [axis(t1, i), axis(t2, j)];
            let sse = sse_unchecked(from_theta(theta), pairs, weights);
            if sse < best_sse {
                best_sse = sse;
                best_theta = theta;
            }
        }
    }

    // Compass-search refinement within the bounds, starting at one cell width.
    let clamp = |theta: [f64; 2]| [theta[0].clamp(t1.0, t1.1), theta[1].clamp(t2.0, t2.1)];
    let mut step = [
        (t1.1 - t1.0) / (grid_steps - 1) as f64,
        (t2.1 - t2.0) / (grid_steps - 1) as f64,
    ];
    let mut evaluations = 0usize;
    while (step[0] > 1e-13 || step[1] > 1e-13) && evaluations < 200_000 {
        let mut improved = false;
        for (axis_index, sign) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
            if step[axis_index] == 0.0 {
                continue;
            }
            let mut candidate = best_theta;
            candidate[axis_index] += sign * step[axis_index];
            let candidate = clamp(candidate);
            if candidate == best_theta {
                continue;
            }
            let sse = sse_unchecked(from_theta(candidate), pairs, weights);
            evaluations += 1;
            if sse < best_sse {
                best_sse = sse;
                best_theta = candidate;
                improved = true;
            }
        }
        if !improved {
            step = [step[0] * 0.5, step[1] * 0.5];
        }
    }

    // Snap range endpoints back to the exact requested bounds; ln/exp round
    // trips are only accurate to the last ulp.
    let snap = |theta: f64, range: (f64, f64), bounds: (f64, f64)| {
        if theta == range.0 {
            bounds.1
        } else if theta == range.1 {
            bounds.0
        } else {
            -theta.exp()
        }
    };
    let params = CurveParams::new(
        snap(best_theta[0], t1, b1_range),
        snap(best_theta[1], t2, b2_range),
    )?;
    let residuals = pairs
        .iter()
        .map(|&(x, t)| t - (crate::model::ASYMPTOTE + params.b1() * x.powf(params.b2())))
        .collect();
    Ok(FitResult {
        params,
        residuals,
        weighted_sse: sse_unchecked(params, pairs, weights),
        iterations_used: evaluations,
        converged: true,
        condition_warning: false,
        accepted_sse: vec![best_sse],
    })
}
