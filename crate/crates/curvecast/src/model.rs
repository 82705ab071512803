//! Inverse power-law learning-curve model.
//!
//! Classification accuracy as a function of the per-class training-set size
//! is modeled as `y(x) = 100 + b1 * x^b2` with `b1 <= 0` and `b2 < 0`, so the
//! curve rises monotonically toward the 100% asymptote. The exponent pair is
//! the only free state; the asymptote is fixed.

use serde::Serialize;
use thiserror::Error;

/// Fixed accuracy ceiling of the model, in percent.
pub const ASYMPTOTE: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("learning rate b1 must be a finite value <= 0, got {0}")]
    InvalidLearningRate(f64),
    #[error("decay rate b2 must be a finite value < 0, got {0}")]
    InvalidDecayRate(f64),
    #[error("training-set size must be positive, got {0}")]
    NonPositiveSize(f64),
    #[error("flat curve (b1 = 0) never reaches an accuracy other than the asymptote")]
    FlatCurve,
    #[error("target accuracy {0} is unreachable; the curve stays below 100")]
    UnreachableTarget(f64),
}

/// The free parameters of the learning curve.
///
/// `b1` scales the accuracy deficit (learning rate), `b2` controls how fast
/// the deficit shrinks with more data (decay rate). Construction enforces the
/// sign constraints, so a `CurveParams` value is always a valid curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveParams {
    b1: f64,
    b2: f64,
}

impl CurveParams {
    pub fn new(b1: f64, b2: f64) -> Result<Self, ModelError> {
        if !b1.is_finite() || b1 > 0.0 {
            return Err(ModelError::InvalidLearningRate(b1));
        }
        if !b2.is_finite() || b2 >= 0.0 {
            return Err(ModelError::InvalidDecayRate(b2));
        }
        Ok(Self { b1, b2 })
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    /// Model accuracy at size `x`, unclamped.
    ///
    /// The raw value can be far below 0 for small `x`; reporting code is
    /// responsible for clamping into [0, 100].
    pub fn eval(&self, x: f64) -> Result<f64, ModelError> {
        check_size(x)?;
        Ok(ASYMPTOTE + self.b1 * x.powf(self.b2))
    }

    /// Analytic partial derivatives of `eval` with respect to (b1, b2).
    pub fn jacobian_row(&self, x: f64) -> Result<JacobianRow, ModelError> {
        check_size(x)?;
        let pow = x.powf(self.b2);
        Ok(JacobianRow {
            d_b1: pow,
            d_b2: self.b1 * pow * x.ln(),
        })
    }

    /// Smallest (real-valued) size at which the curve reaches `target`.
    ///
    /// Solves `target = 100 + b1 * x^b2` for `x`. A solution below one sample
    /// is still returned, but flagged `sub_unit` so callers can warn.
    pub fn invert_for_size(&self, target: f64) -> Result<InvertedSize, ModelError> {
        if self.b1 == 0.0 {
            return Err(ModelError::FlatCurve);
        }
        if !target.is_finite() || target >= ASYMPTOTE {
            return Err(ModelError::UnreachableTarget(target));
        }
        let size = ((target - ASYMPTOTE) / self.b1).powf(1.0 / self.b2);
        Ok(InvertedSize {
            size,
            sub_unit: size < 1.0,
        })
    }
}

/// Row of the fit Jacobian at a single size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianRow {
    /// d y / d b1 = x^b2
    pub d_b1: f64,
    /// d y / d b2 = b1 * x^b2 * ln(x)
    pub d_b2: f64,
}

/// Result of inverting the curve for a target accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertedSize {
    pub size: f64,
    /// True when the solution falls below a single training sample.
    pub sub_unit: bool,
}

fn check_size(x: f64) -> Result<(), ModelError> {
    if !x.is_finite() || x <= 0.0 {
        return Err(ModelError::NonPositiveSize(x));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn params(b1: f64, b2: f64) -> CurveParams {
        CurveParams::new(b1, b2).unwrap()
    }

    /// Central finite difference of `eval` in each parameter; the independent
    /// oracle for the analytic Jacobian.
    fn finite_difference_row(p: CurveParams, x: f64, h1: f64, h2: f64) -> (f64, f64) {
        let at = |b1: f64, b2: f64| ASYMPTOTE + b1 * x.powf(b2);
        let d_b1 = (at(p.b1() + h1, p.b2()) - at(p.b1() - h1, p.b2())) / (2.0 * h1);
        let d_b2 = (at(p.b1(), p.b2() + h2) - at(p.b1(), p.b2() - h2)) / (2.0 * h2);
        (d_b1, d_b2)
    }

    #[test]
    fn construction_rejects_wrong_signs() {
        assert!(matches!(
            CurveParams::new(1.0, -1.0),
            Err(ModelError::InvalidLearningRate(_))
        ));
        assert!(matches!(
            CurveParams::new(-1.0, 0.0),
            Err(ModelError::InvalidDecayRate(_))
        ));
        assert!(matches!(
            CurveParams::new(-1.0, 0.5),
            Err(ModelError::InvalidDecayRate(_))
        ));
        assert!(matches!(
            CurveParams::new(f64::NAN, -1.0),
            Err(ModelError::InvalidLearningRate(_))
        ));
        // b1 = 0 is a legal (flat) curve.
        assert!(CurveParams::new(0.0, -1.0).is_ok());
    }

    #[test]
    fn eval_closed_form_values() {
        assert_relative_eq!(
            params(-200.0, -1.0).eval(10.0).unwrap(),
            80.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            params(0.0, -1.0).eval(7.0).unwrap(),
            100.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            params(-50.0, -1.0).eval(1.0).unwrap(),
            50.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn eval_rejects_nonpositive_size() {
        assert!(matches!(
            params(-200.0, -1.0).eval(0.0),
            Err(ModelError::NonPositiveSize(_))
        ));
        assert!(matches!(
            params(-200.0, -1.0).eval(-3.0),
            Err(ModelError::NonPositiveSize(_))
        ));
    }

    #[test]
    fn jacobian_closed_form_values() {
        let row = params(-200.0, -1.0).jacobian_row(10.0).unwrap();
        assert_abs_diff_eq!(row.d_b1, 0.1, epsilon = 1e-4);
        assert_abs_diff_eq!(row.d_b2, -46.0517, epsilon = 1e-4);

        let at_one = params(-37.0, -0.4).jacobian_row(1.0).unwrap();
        assert_relative_eq!(at_one.d_b1, 1.0, max_relative = 1e-12);
        assert_abs_diff_eq!(at_one.d_b2, 0.0);
    }

    #[test]
    fn jacobian_matches_finite_difference_at_example_point() {
        let p = params(-200.0, -1.0);
        let row = p.jacobian_row(10.0).unwrap();
        let (fd1, fd2) = finite_difference_row(p, 10.0, 1e-6, 1e-6);
        assert_relative_eq!(row.d_b1, fd1, max_relative = 1e-6);
        assert_relative_eq!(row.d_b2, fd2, max_relative = 1e-6);
    }

    #[test]
    fn jacobian_matches_finite_difference_randomized() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC0FFEE);
        for _ in 0..100 {
            let b1 = -rng.random_range(20.0..3000.0f64);
            let b2 = -rng.random_range(0.3..1.5f64);
            let x = rng.random_range((2.0f64).ln()..(200.0f64).ln()).exp();
            let p = params(b1, b2);
            let row = p.jacobian_row(x).unwrap();
            let h1 = 1e-6 * b1.abs().max(1.0);
            let h2 = 1e-6 * b2.abs().max(1.0);
            let (fd1, fd2) = finite_difference_row(p, x, h1, h2);
            assert_relative_eq!(row.d_b1, fd1, max_relative = 1e-6);
            assert_relative_eq!(row.d_b2, fd2, max_relative = 1e-6);
        }
    }

    #[test]
    fn invert_closed_form_values() {
        let p = params(-200.0, -1.0);
        let solved = p.invert_for_size(99.5).unwrap();
        assert_relative_eq!(solved.size, 400.0, max_relative = 1e-12);
        assert!(!solved.sub_unit);

        let back = p.invert_for_size(80.0).unwrap();
        assert_relative_eq!(back.size, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn invert_error_paths() {
        assert_eq!(
            params(0.0, -1.0).invert_for_size(90.0),
            Err(ModelError::FlatCurve)
        );
        assert_eq!(
            params(-200.0, -1.0).invert_for_size(100.0),
            Err(ModelError::UnreachableTarget(100.0))
        );
        // Solution below one sample is returned with the sub-unit flag.
        let solved = params(-50.0, -2.0).invert_for_size(0.0).unwrap();
        assert!(solved.sub_unit);
        assert!(solved.size < 1.0 && solved.size > 0.0);
    }

    #[test]
    fn invert_round_trips_through_eval() {
        let p = params(-173.0, -0.82);
        let (lo, hi) = (2.0f64.ln(), 1e5f64.ln());
        for i in 0..50 {
            let x = (lo + (hi - lo) * i as f64 / 49.0).exp();
            let y = p.eval(x).unwrap();
            let solved = p.invert_for_size(y).unwrap();
            assert_relative_eq!(solved.size, x, max_relative = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn monotone_and_bounded(
            b1 in -5000.0..-1e-3f64,
            b2 in -2.0..-0.05f64,
            x1 in 1e-2..1e6f64,
            factor in 1.001..1e3f64,
        ) {
            let p = params(b1, b2);
            let lo = p.eval(x1).unwrap();
            let hi = p.eval(x1 * factor).unwrap();
            // The true increase is the deficit shrinkage; only insist on a
            // strict f64 inequality where it is representable next to 100.
            let true_increase = -b1 * (x1.powf(b2) - (x1 * factor).powf(b2));
            if true_increase > 1e-9 {
                prop_assert!(hi > lo, "curve must increase: {lo} !< {hi}");
            } else {
                prop_assert!(hi >= lo);
            }
            // Never above the asymptote; equality only by f64 saturation.
            prop_assert!(hi <= ASYMPTOTE);
            if -b1 * (x1 * factor).powf(b2) > 1e-9 {
                prop_assert!(hi < ASYMPTOTE);
            }
        }

        #[test]
        fn jacobian_signs(
            b1 in -5000.0..-1e-3f64,
            b2 in -2.0..-0.05f64,
            x in 1e-2..1e6f64,
        ) {
            let row = params(b1, b2).jacobian_row(x).unwrap();
            prop_assert!(row.d_b1 > 0.0);
            // b1 < 0 flips the sign of ln x.
            if x > 1.0 {
                prop_assert!(row.d_b2 < 0.0);
            } else if x < 1.0 {
                prop_assert!(row.d_b2 > 0.0);
            }
        }
    }

    #[test]
    fn approaches_asymptote() {
        let p = params(-200.0, -0.5);
        for eps in [1.0, 1e-3, 1e-6] {
            // Solve for the size that brings the deficit under eps, then
            // check the curve is above 100 - eps there.
            let x = p.invert_for_size(ASYMPTOTE - eps).unwrap().size * 1.01;
            assert!(ASYMPTOTE - p.eval(x).unwrap() < eps);
        }
    }
}
