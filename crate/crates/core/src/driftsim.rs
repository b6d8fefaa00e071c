//! Deterministic synthetic streams with injectable drift.
//!
//! The sample at stream position `p` is a pure function of `(scenario, p)`:
//! its random draws come from a ChaCha stream keyed by the scenario seed and
//! selected by `p`, so batches can be regenerated in any order.
//!
//! Targets are `g(s) + offset(p) + noise`, where `s` is the mean feature,
//! `g` the base function, and `offset(p) = magnitude * progress(p)` (concept
//! drift). Features are uniform on `[feature_low, feature_high]` shifted by
//! `covariate_shift * progress(p)` (covariate drift). Noise is Gaussian with
//! scale `noise * (1 + heteroscedasticity * |s|)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    None,
    Sudden,
    Gradual,
    Recurring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseFunction {
    Sine,
    PiecewiseLinear,
    Quadratic,
}

impl BaseFunction {
    pub fn eval(self, s: f64) -> f64 {
        match self {
            BaseFunction::Sine => (3.0 * s).sin(),
            BaseFunction::PiecewiseLinear => {
                if s < 0.0 {
                    0.5 * s
                } else {
                    2.0 * s
                }
            }
            BaseFunction::Quadratic => s * s,
        }
    }
}

fn default_low() -> f64 {
    -1.0
}

fn default_high() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftScenario {
    pub kind: DriftKind,
    pub base: BaseFunction,
    /// Gaussian noise scale, > 0.
    pub noise: f64,
    /// Target offset once drift is fully active.
    #[serde(default)]
    pub magnitude: f64,
    /// Feature shift once drift is fully active.
    #[serde(default)]
    pub covariate_shift: f64,
    #[serde(default)]
    pub heteroscedasticity: f64,
    /// First stream position affected by drift.
    #[serde(default)]
    pub onset: u64,
    /// Ramp length for gradual drift.
    #[serde(default)]
    pub duration: u64,
    /// Cycle length for recurring drift; drift is active in the first half.
    #[serde(default)]
    pub period: u64,
    pub dim: usize,
    #[serde(default = "default_low")]
    pub feature_low: f64,
    #[serde(default = "default_high")]
    pub feature_high: f64,
    pub seed: u64,
}

impl DriftScenario {
    /// A drift-free sine scenario in one dimension.
    pub fn stationary(noise: f64, seed: u64) -> Self {
        DriftScenario {
            kind: DriftKind::None,
            base: BaseFunction::Sine,
            noise,
            magnitude: 0.0,
            covariate_shift: 0.0,
            heteroscedasticity: 0.0,
            onset: 0,
            duration: 0,
            period: 0,
            dim: 1,
            feature_low: default_low(),
            feature_high: default_high(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(m.to_owned()));
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return bad("noise scale must be > 0");
        }
        if !self.magnitude.is_finite() || !self.covariate_shift.is_finite() {
            return bad("drift magnitudes must be finite");
        }
        if !(self.heteroscedasticity >= 0.0 && self.heteroscedasticity.is_finite()) {
            return bad("heteroscedasticity must be >= 0");
        }
        if self.dim < 1 {
            return bad("feature dimension must be >= 1");
        }
        if !(self.feature_low < self.feature_high && self.feature_high.is_finite() && self.feature_low.is_finite()) {
            return bad("feature range must satisfy low < high");
        }
        match self.kind {
            DriftKind::Gradual if self.duration < 1 => bad("gradual drift needs duration >= 1"),
            DriftKind::Recurring if self.period < 2 => bad("recurring drift needs period >= 2"),
            _ => Ok(()),
        }
    }

    /// Fraction of the full drift active at position `p`, in `[0, 1]`.
    pub fn progress(&self, p: u64) -> f64 {
        if p < self.onset {
            return 0.0;
        }
        let since = p - self.onset;
        match self.kind {
            DriftKind::None => 0.0,
            DriftKind::Sudden => 1.0,
            DriftKind::Gradual => (since as f64 / self.duration as f64).min(1.0),
            DriftKind::Recurring => {
                if since % self.period < self.period / 2 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn params_at(&self, p: u64) -> DriftParams {
        let progress = self.progress(p);
        DriftParams {
            progress,
            target_offset: self.magnitude * progress,
            feature_shift: self.covariate_shift * progress,
        }
    }

    /// Noise-free target at `x` and position `p`.
    pub fn mean_target(&self, x: &[f64], p: u64) -> f64 {
        let s = x.iter().sum::<f64>() / x.len() as f64;
        self.base.eval(s) + self.params_at(p).target_offset
    }

    pub fn fingerprint(&self) -> String {
        seed::digest(&serde_json::to_vec(self).expect("scenario serializes"))
    }

    /// The sample at stream position `p`.
    pub fn sample_at<T: Scalar>(&self, p: u64) -> Sample<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, "stream"));
        rng.set_stream(p);
        let params = self.params_at(p);
        let x: Vec<f64> = (0..self.dim)
            .map(|_| rng.random_range(self.feature_low..self.feature_high) + params.feature_shift)
            .collect();
        let s = x.iter().sum::<f64>() / self.dim as f64;
        let z: f64 = StandardNormal.sample(&mut rng);
        let scale = self.noise * (1.0 + self.heteroscedasticity * s.abs());
        let y = self.base.eval(s) + params.target_offset + scale * z;
        Sample::new(p, x.into_iter().map(T::lit).collect(), T::lit(y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftParams {
    pub progress: f64,
    pub target_offset: f64,
    pub feature_shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamBatch<T> {
    pub samples: Dataset<T>,
    /// First stream position in the batch.
    pub start: u64,
    /// One past the last position.
    pub end: u64,
    pub scenario_fingerprint: String,
}

/// Cursor over a scenario's stream.
#[derive(Debug, Clone)]
pub struct Stream {
    scenario: DriftScenario,
    position: u64,
    fingerprint: String,
}

pub fn make_stream(scenario: &DriftScenario) -> Result<Stream> {
    scenario.validate()?;
    Ok(Stream {
        fingerprint: scenario.fingerprint(),
        scenario: scenario.clone(),
        position: 0,
    })
}

impl Stream {
    pub fn scenario(&self) -> &DriftScenario {
        &self.scenario
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_batch<T: Scalar>(&mut self, batch_size: usize) -> Result<StreamBatch<T>> {
        if batch_size < 1 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        let start = self.position;
        let end = start + batch_size as u64;
        let batch = self.batch_at(start, end)?;
        self.position = end;
        Ok(batch)
    }

    /// Positions `[start, end)` without moving the cursor.
    pub fn batch_at<T: Scalar>(&self, start: u64, end: u64) -> Result<StreamBatch<T>> {
        let samples = (start..end).map(|p| self.scenario.sample_at(p)).collect();
        Ok(StreamBatch {
            samples: Dataset::new(format!("stream[{start}..{end})"), self.scenario.dim, samples)?,
            start,
            end,
            scenario_fingerprint: self.fingerprint.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sudden(onset: u64) -> DriftScenario {
        DriftScenario {
            kind: DriftKind::Sudden,
            magnitude: 1.5,
            onset,
            ..DriftScenario::stationary(0.3, 17)
        }
    }

    #[test]
    fn no_drift_params_constant() {
        let s = DriftScenario::stationary(0.1, 1);
        for p in [0, 1, 100, 10_000] {
            assert_eq!(s.params_at(p), s.params_at(0));
        }
    }

    #[test]
    fn sudden_matches_twin_before_onset() {
        let d = sudden(100);
        let none = DriftScenario { kind: DriftKind::None, ..d.clone() };
        let a: StreamBatch<f64> = make_stream(&d).unwrap().next_batch(100).unwrap();
        let b: StreamBatch<f64> = make_stream(&none).unwrap().next_batch(100).unwrap();
        assert_eq!(a.samples.samples(), b.samples.samples());
        let after_d: Sample<f64> = d.sample_at(150);
        let after_n: Sample<f64> = none.sample_at(150);
        assert_eq!(after_d.x, after_n.x);
        assert!((after_d.y - after_n.y - 1.5).abs() < 1e-12);
    }

    #[test]
    fn gradual_half_way() {
        let g = DriftScenario {
            kind: DriftKind::Gradual,
            magnitude: 4.0,
            onset: 10,
            duration: 20,
            ..DriftScenario::stationary(0.1, 0)
        };
        assert_eq!(g.params_at(20).target_offset, 2.0);
        assert_eq!(g.params_at(9).target_offset, 0.0);
        assert_eq!(g.params_at(1000).target_offset, 4.0);
    }

    #[test]
    fn recurring_is_periodic_after_onset() {
        let r = DriftScenario {
            kind: DriftKind::Recurring,
            magnitude: 1.0,
            onset: 5,
            period: 8,
            ..DriftScenario::stationary(0.1, 0)
        };
        for p in 5..100 {
            assert_eq!(r.params_at(p), r.params_at(p + 8));
        }
        assert_eq!(r.progress(5), 1.0);
        assert_eq!(r.progress(9), 0.0);
    }

    #[test]
    fn batching_is_position_pure() {
        let d = sudden(3);
        let mut one = make_stream(&d).unwrap();
        let mut singles = Vec::new();
        for _ in 0..10 {
            singles.extend(one.next_batch::<f64>(1).unwrap().samples.samples().to_vec());
        }
        let all = make_stream(&d).unwrap().next_batch::<f64>(10).unwrap();
        assert_eq!(all.samples.samples(), singles.as_slice());
        let mut s2 = make_stream(&d).unwrap();
        let first = s2.next_batch::<f64>(4).unwrap();
        let second = s2.next_batch::<f64>(4).unwrap();
        assert_eq!((first.end, second.start), (4, 4));
    }

    #[test]
    fn invalid_scenarios() {
        let mut s = DriftScenario::stationary(0.1, 0);
        s.noise = 0.0;
        assert!(make_stream(&s).is_err());
        let g = DriftScenario { kind: DriftKind::Gradual, ..DriftScenario::stationary(0.1, 0) };
        assert!(make_stream(&g).is_err());
        let r = DriftScenario { kind: DriftKind::Recurring, period: 1, ..DriftScenario::stationary(0.1, 0) };
        assert!(make_stream(&r).is_err());
    }

    #[test]
    fn covariate_shift_moves_features() {
        let c = DriftScenario {
            kind: DriftKind::Sudden,
            covariate_shift: 5.0,
            onset: 0,
            ..DriftScenario::stationary(0.1, 0)
        };
        let b = make_stream(&c).unwrap().next_batch::<f64>(50).unwrap();
        assert!(b.samples.iter().all(|s| s.x[0] >= 4.0 && s.x[0] < 6.0));
    }
}
