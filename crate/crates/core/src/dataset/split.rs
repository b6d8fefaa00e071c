use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Fractions for the train / calibration / test partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub calibration: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.5,
            calibration: 0.25,
            test: 0.25,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train", self.train),
            ("calibration", self.calibration),
            ("test", self.test),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidSplit(format!("{name} fraction {f} outside [0, 1]")));
            }
        }
        let sum = self.train + self.calibration + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Split sizes for `n` rows; calibration and test are floored, train takes the rest.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let cal = (n as f64 * self.calibration).floor() as usize;
        let test = (n as f64 * self.test).floor() as usize;
        (n - cal - test, cal, test)
    }
}

/// Shuffles deterministically from `spec.seed` and cuts into (train, cal, test).
pub fn split<T: Scalar>(
    ds: &Dataset<T>,
    spec: &SplitSpec,
) -> Result<(Dataset<T>, Dataset<T>, Dataset<T>)> {
    spec.validate()?;
    let n = ds.len();
    let (n_train, n_cal, n_test) = spec.sizes(n);
    for (name, frac, size) in [
        ("train", spec.train, n_train),
        ("calibration", spec.calibration, n_cal),
        ("test", spec.test, n_test),
    ] {
        if frac > 0.0 && size == 0 {
            return Err(Error::InvalidSplit(format!(
                "{n} rows too few for a nonempty {name} split"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(spec.seed, "split")));
    let take = |range: std::ops::Range<usize>| {
        order[range]
            .iter()
            .map(|&i| ds.samples()[i].clone())
            .collect::<Vec<_>>()
    };
    let name = ds.name();
    Ok((
        ds.derive(format!("{name}-train"), take(0..n_train))?,
        ds.derive(format!("{name}-cal"), take(n_train..n_train + n_cal))?,
        ds.derive(format!("{name}-test"), take(n_train + n_cal..n))?,
    ))
}
