//! Calibrated prediction intervals from three models.
//!
//! With deployed model `f` and nonnegative bound models `u`, `l`, the interval
//! at `x` is `[f(x) - beta * l(x), f(x) + alpha * u(x)]`. The coefficients are
//! solved independently per tail so that the number of calibration points
//! escaping each side is as close as possible to (and not above)
//! `N (1 - gamma) / 2`, where `N` is the size of the parent dataset:
//!
//! ```text
//! Q1(alpha) = #{ i in d1 : y_i > f(x_i) + alpha u(x_i) } - N (1 - gamma) / 2
//! Q0(beta)  = #{ i in d0 : y_i < f(x_i) - beta  l(x_i) } - N (1 - gamma) / 2
//! ```
//!
//! Both are non-increasing step functions, so the roots are found with
//! [`bisect_root`].

mod bisect;
mod record;
mod segmented;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, ResidualSide, Result};
use crate::regressor::{Regressor, RegressorSpec};
use crate::residuals::{fit_bound_models, reconstruct, ResidualSplit};
use crate::scalar::Scalar;

pub use bisect::{bisect_root, BisectOptions, BisectionDiagnostics, Root};
pub use record::CALIBRATION_FORMAT_VERSION;
pub use segmented::{calibrate_per_segment, SegmentCalibration, SegmentedCalibration, DEFAULT_MIN_SEGMENT};

/// Target coverage level, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Confidence(f64);

impl Confidence {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma < 1.0 {
            Ok(Confidence(gamma))
        } else {
            Err(Error::InvalidConfidence(gamma))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Allowed exceedances per tail for a parent dataset of size `n`.
    ///
    /// Values within rounding noise of an integer are snapped to it, so that
    /// e.g. `2000 * (1 - 0.9) / 2` is exactly 100 rather than 99.99999999999999.
    pub fn target_per_tail(self, n: usize) -> f64 {
        let t = n as f64 * (1.0 - self.0) / 2.0;
        let r = t.round();
        if (t - r).abs() <= 1e-9 * r.abs().max(1.0) {
            r
        } else {
            t
        }
    }
}

impl TryFrom<f64> for Confidence {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Confidence::new(v)
    }
}

impl From<Confidence> for f64 {
    fn from(c: Confidence) -> f64 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionInterval<T> {
    pub lower: T,
    pub upper: T,
    pub center: T,
    pub width: T,
}

impl<T: Scalar> PredictionInterval<T> {
    pub fn new(lower: T, center: T, upper: T) -> Self {
        PredictionInterval {
            lower,
            upper,
            center,
            width: upper - lower,
        }
    }

    /// Closed-interval membership.
    pub fn contains(&self, y: T) -> bool {
        self.lower <= y && y <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: Confidence,
    pub parent_n: usize,
    pub target_per_tail: f64,
    pub upper_exceedances: usize,
    pub lower_exceedances: usize,
    pub upper_search: BisectionDiagnostics,
    pub lower_search: BisectionDiagnostics,
    pub f_fingerprint: String,
    pub u_fingerprint: String,
    pub l_fingerprint: String,
    pub segment: Option<String>,
}

impl<T: Scalar> CalibrationResult<T> {
    /// Calibration points inside the interval: `N` minus both tails.
    pub fn covered(&self) -> usize {
        self.parent_n - self.upper_exceedances - self.lower_exceedances
    }

    fn check_models(&self, f: &Regressor<T>, u: &Regressor<T>, l: &Regressor<T>) -> Result<()> {
        for (what, expected, model) in [
            ("deployed model", &self.f_fingerprint, f),
            ("upper bound model", &self.u_fingerprint, u),
            ("lower bound model", &self.l_fingerprint, l),
        ] {
            let found = model.fingerprint();
            if &found != expected {
                return Err(Error::FingerprintMismatch {
                    what,
                    expected: expected.clone(),
                    found,
                });
            }
        }
        Ok(())
    }
}

/// Precomputed per-sample quantities for one tail's counting function.
struct TailCounter<T> {
    side: ResidualSide,
    center: Vec<T>,
    bound: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> TailCounter<T> {
    fn new(side: ResidualSide, f: &Regressor<T>, bound: &Regressor<T>, data: &Dataset<T>) -> Result<Self> {
        let center = f.predict_dataset(data)?;
        let bound_pred = bound.predict_dataset(data)?;
        let y = data
            .iter()
            .zip(&center)
            .map(|(s, &fx)| reconstruct(side, fx, s))
            .collect();
        Ok(TailCounter {
            side,
            center,
            bound: bound_pred,
            y,
        })
    }

    fn exceedances(&self, coef: T) -> usize {
        let iter = self.y.iter().zip(&self.center).zip(&self.bound);
        match self.side {
            ResidualSide::Upper => iter.filter(|((&y, &fx), &b)| y > fx + coef * b).count(),
            ResidualSide::Lower => iter.filter(|((&y, &fx), &b)| y < fx - coef * b).count(),
        }
    }
}

fn check_coefficient<T: Scalar>(c: T) -> Result<()> {
    if c < T::zero() || !c.is_finite() {
        return Err(Error::NegativeCoefficient(c.as_f64()));
    }
    Ok(())
}

/// `Q1(alpha)`: upper exceedances among `d1` minus `parent_n (1 - gamma) / 2`.
/// Targets are reconstructed as `f(x) + residual`.
pub fn q_upper<T: Scalar>(
    alpha: T,
    f: &Regressor<T>,
    u: &Regressor<T>,
    d1: &Dataset<T>,
    parent_n: usize,
    gamma: Confidence,
) -> Result<f64> {
    check_coefficient(alpha)?;
    let c = TailCounter::new(ResidualSide::Upper, f, u, d1)?;
    Ok(c.exceedances(alpha) as f64 - gamma.target_per_tail(parent_n))
}

/// `Q0(beta)`: lower exceedances among `d0` minus `parent_n (1 - gamma) / 2`.
pub fn q_lower<T: Scalar>(
    beta: T,
    f: &Regressor<T>,
    l: &Regressor<T>,
    d0: &Dataset<T>,
    parent_n: usize,
    gamma: Confidence,
) -> Result<f64> {
    check_coefficient(beta)?;
    let c = TailCounter::new(ResidualSide::Lower, f, l, d0)?;
    Ok(c.exceedances(beta) as f64 - gamma.target_per_tail(parent_n))
}

/// The three models plus their calibration; everything needed to emit intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedModel<T> {
    pub f: Regressor<T>,
    pub u: Regressor<T>,
    pub l: Regressor<T>,
    pub result: CalibrationResult<T>,
}

impl<T: Scalar> CalibratedModel<T> {
    /// Bundles models with a result, verifying all three fingerprints once.
    pub fn new(f: Regressor<T>, u: Regressor<T>, l: Regressor<T>, result: CalibrationResult<T>) -> Result<Self> {
        result.check_models(&f, &u, &l)?;
        Ok(CalibratedModel { f, u, l, result })
    }

    pub fn predict(&self, x: &[T]) -> Result<PredictionInterval<T>> {
        let fx = self.f.predict(x)?;
        let ux = self.u.predict(x)?;
        let lx = self.l.predict(x)?;
        Ok(PredictionInterval::new(
            fx - self.result.beta * lx,
            fx,
            fx + self.result.alpha * ux,
        ))
    }

    pub fn predict_dataset(&self, ds: &Dataset<T>) -> Result<Vec<PredictionInterval<T>>> {
        let fx = self.f.predict_dataset(ds)?;
        let ux = self.u.predict_dataset(ds)?;
        let lx = self.l.predict_dataset(ds)?;
        Ok(fx
            .iter()
            .zip(ux.iter().zip(&lx))
            .map(|(&c, (&up, &lo))| {
                PredictionInterval::new(c - self.result.beta * lo, c, c + self.result.alpha * up)
            })
            .collect())
    }
}

/// Trains `u` and `l` on the residual sets and solves `alpha`, `beta` by bisection.
pub fn calibrate<T: Scalar>(
    f: &Regressor<T>,
    split: &ResidualSplit<T>,
    spec: &RegressorSpec,
    gamma: Confidence,
    opts: &BisectOptions,
) -> Result<CalibratedModel<T>> {
    let f_fp = f.fingerprint();
    if f_fp != split.model_fingerprint {
        return Err(Error::FingerprintMismatch {
            what: "residual split",
            expected: split.model_fingerprint.clone(),
            found: f_fp,
        });
    }
    let (u, l) = fit_bound_models(split, spec)?;
    calibrate_with_bounds(f, u, l, split, gamma, opts)
}

/// Solves `alpha`, `beta` for already-trained bound models.
pub fn calibrate_with_bounds<T: Scalar>(
    f: &Regressor<T>,
    u: Regressor<T>,
    l: Regressor<T>,
    split: &ResidualSplit<T>,
    gamma: Confidence,
    opts: &BisectOptions,
) -> Result<CalibratedModel<T>> {
    let target = gamma.target_per_tail(split.parent_n);
    let upper = TailCounter::new(ResidualSide::Upper, f, &u, &split.d1)?;
    let lower = TailCounter::new(ResidualSide::Lower, f, &l, &split.d0)?;
    let alpha = bisect_root(|a| upper.exceedances(a) as f64 - target, opts)?;
    let beta = bisect_root(|b| lower.exceedances(b) as f64 - target, opts)?;
    let result = CalibrationResult {
        alpha: alpha.root,
        beta: beta.root,
        gamma,
        parent_n: split.parent_n,
        target_per_tail: target,
        upper_exceedances: upper.exceedances(alpha.root),
        lower_exceedances: lower.exceedances(beta.root),
        upper_search: alpha.diagnostics,
        lower_search: beta.diagnostics,
        f_fingerprint: f.fingerprint(),
        u_fingerprint: u.fingerprint(),
        l_fingerprint: l.fingerprint(),
        segment: None,
    };
    Ok(CalibratedModel {
        f: f.clone(),
        u,
        l,
        result,
    })
}

/// `[f(x) - beta l(x), f(x) + alpha u(x)]`, after checking the models are the
/// ones the result was calibrated with.
pub fn predict_interval<T: Scalar>(
    f: &Regressor<T>,
    u: &Regressor<T>,
    l: &Regressor<T>,
    cal: &CalibrationResult<T>,
    x: &[T],
) -> Result<PredictionInterval<T>> {
    cal.check_models(f, u, l)?;
    let fx = f.predict(x)?;
    Ok(PredictionInterval::new(
        fx - cal.beta * l.predict(x)?,
        fx,
        fx + cal.alpha * u.predict(x)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residuals::split_residuals;

    fn constant(c: f64) -> Regressor<f64> {
        Regressor::from_parameters(RegressorSpec::linear(), 1, vec![0.0, c]).unwrap()
    }

    /// f = 0, residuals 1..=10 above (and mirrored below for the lower tail).
    fn ten_each_side() -> (Regressor<f64>, ResidualSplit<f64>) {
        let mut ys: Vec<f64> = (1..=10).map(f64::from).collect();
        ys.extend((1..=10).map(|v| -f64::from(v)));
        let ds = Dataset::from_rows("t", vec![vec![0.0]; 20], ys).unwrap();
        let f = constant(0.0);
        let s = split_residuals(&f, &ds).unwrap();
        (f, s)
    }

    #[test]
    fn confidence_bounds() {
        assert!(Confidence::new(0.9).is_ok());
        for g in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(Confidence::new(g), Err(Error::InvalidConfidence(_))));
        }
    }

    #[test]
    fn target_snaps_to_integer() {
        let g = Confidence::new(0.9).unwrap();
        assert_eq!(g.target_per_tail(20), 1.0);
        assert_eq!(g.target_per_tail(2000), 100.0);
        assert_eq!(Confidence::new(0.5).unwrap().target_per_tail(3), 0.75);
    }

    #[test]
    fn q_hand_counts() {
        let (f, s) = ten_each_side();
        let one = constant(1.0);
        let g = Confidence::new(0.9).unwrap();
        // N = 20, target = 20 * 0.1 / 2 = 1
        assert_eq!(q_upper(5.5, &f, &one, &s.d1, 20, g).unwrap(), 4.0);
        assert_eq!(q_lower(5.5, &f, &one, &s.d0, 20, g).unwrap(), 4.0);
        assert_eq!(q_upper(0.0, &f, &one, &s.d1, 20, g).unwrap(), 10.0 - 1.0);
        assert_eq!(q_lower(0.0, &f, &one, &s.d0, 20, g).unwrap(), 10.0 - 1.0);
        assert_eq!(q_upper(1e6, &f, &one, &s.d1, 20, g).unwrap(), -1.0);
        assert_eq!(q_lower(1e6, &f, &one, &s.d0, 20, g).unwrap(), -1.0);
        assert!(matches!(
            q_upper(-0.1, &f, &one, &s.d1, 20, g),
            Err(Error::NegativeCoefficient(_))
        ));
    }

    #[test]
    fn calibrated_coefficients_for_hand_case() {
        let (f, s) = ten_each_side();
        let g = Confidence::new(0.9).unwrap();
        let m = calibrate_with_bounds(&f, constant(1.0), constant(1.0), &s, g, &BisectOptions::default()).unwrap();
        // count at 9 is exactly the target, so 9 is the smallest root
        assert!(m.result.alpha >= 9.0 && m.result.alpha <= 9.0 + 1e-9);
        assert!(m.result.beta >= 9.0 && m.result.beta <= 9.0 + 1e-9);
        assert_eq!(m.result.upper_exceedances, 1);
        assert_eq!(m.result.lower_exceedances, 1);
        assert_eq!(m.result.covered(), 18);
    }

    #[test]
    fn interval_arithmetic() {
        let f = constant(10.0);
        let u = constant(2.0);
        let l = constant(1.0);
        let mut r = CalibrationResult {
            alpha: 0.5,
            beta: 2.0,
            gamma: Confidence::new(0.9).unwrap(),
            parent_n: 0,
            target_per_tail: 0.0,
            upper_exceedances: 0,
            lower_exceedances: 0,
            upper_search: BisectionDiagnostics { iterations: 0, doublings: 0, bracket_width: 0.0 },
            lower_search: BisectionDiagnostics { iterations: 0, doublings: 0, bracket_width: 0.0 },
            f_fingerprint: f.fingerprint(),
            u_fingerprint: u.fingerprint(),
            l_fingerprint: l.fingerprint(),
            segment: None,
        };
        let pi = predict_interval(&f, &u, &l, &r, &[0.3]).unwrap();
        assert_eq!((pi.lower, pi.center, pi.upper, pi.width), (8.0, 10.0, 11.0, 3.0));
        r.alpha = 0.0;
        r.beta = 0.0;
        let pi = predict_interval(&f, &u, &l, &r, &[0.3]).unwrap();
        assert_eq!((pi.lower, pi.upper), (10.0, 10.0));
        assert!(matches!(
            predict_interval(&f, &l, &l, &r, &[0.3]),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn stale_split_is_rejected() {
        let (_, s) = ten_each_side();
        let other = constant(0.5);
        let g = Confidence::new(0.9).unwrap();
        assert!(matches!(
            calibrate(&other, &s, &RegressorSpec::linear(), g, &BisectOptions::default()),
            Err(Error::FingerprintMismatch { .. })
        ));
    }
}
