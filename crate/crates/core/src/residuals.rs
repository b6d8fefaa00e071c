//! Residual datasets for the bound models.
//!
//! Given a deployed model `f` and labelled data, every sample lands in exactly
//! one of two sets:
//!
//! - `d1`: samples with `y >= f(x)`, target `y - f(x)` (trains `u`)
//! - `d0`: samples with `y < f(x)`, target `f(x) - y` (trains `l`)

use std::path::Path;

use crate::dataset::{save_csv, Dataset, Sample};
use crate::error::{Error, ResidualSide, Result};
use crate::regressor::{fit, OutputConstraint, Regressor, RegressorSpec};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSplit<T> {
    pub d1: Dataset<T>,
    pub d0: Dataset<T>,
    pub parent_n: usize,
    pub model_fingerprint: String,
}

impl<T: Scalar> ResidualSplit<T> {
    /// Writes `d1.csv` and `d0.csv` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        save_csv(&self.d1, dir.join("d1.csv"))?;
        save_csv(&self.d0, dir.join("d0.csv"))
    }
}

/// Partitions `edge` by the sign of `y - f(x)`. Ties go to `d1`; sample ids
/// and segment labels are preserved.
pub fn split_residuals<T: Scalar>(f: &Regressor<T>, edge: &Dataset<T>) -> Result<ResidualSplit<T>> {
    if edge.is_empty() {
        return Err(Error::EmptyDataset("residual split input"));
    }
    let preds = f.predict_dataset(edge)?;
    let (mut d1, mut d0) = (Vec::new(), Vec::new());
    for (s, &fx) in edge.iter().zip(&preds) {
        let mut r = s.clone();
        if s.y >= fx {
            r.y = s.y - fx;
            d1.push(r);
        } else {
            r.y = fx - s.y;
            d0.push(r);
        }
    }
    let name = edge.name();
    Ok(ResidualSplit {
        d1: edge.derive(format!("{name}-d1"), d1)?,
        d0: edge.derive(format!("{name}-d0"), d0)?,
        parent_n: edge.len(),
        model_fingerprint: f.fingerprint(),
    })
}

/// Reconstructs the original target of a residual sample.
pub(crate) fn reconstruct<T: Scalar>(side: ResidualSide, fx: T, s: &Sample<T>) -> T {
    match side {
        ResidualSide::Upper => fx + s.y,
        ResidualSide::Lower => fx - s.y,
    }
}

/// Derives the bound-model spec: same architecture, nonnegative output,
/// independent seed per side.
pub fn bound_spec(spec: &RegressorSpec, side: ResidualSide) -> RegressorSpec {
    let tag = match side {
        ResidualSide::Upper => "bound/u",
        ResidualSide::Lower => "bound/l",
    };
    spec.clone()
        .with_output(OutputConstraint::Nonnegative)
        .with_seed(seed::derive(spec.seed, tag))
}

/// Fits `u` on `d1` and `l` on `d0` with MSE on the residual magnitudes.
pub fn fit_bound_models<T: Scalar>(
    split: &ResidualSplit<T>,
    spec: &RegressorSpec,
) -> Result<(Regressor<T>, Regressor<T>)> {
    if split.d1.is_empty() {
        return Err(Error::OneSidedResiduals(ResidualSide::Upper));
    }
    if split.d0.is_empty() {
        return Err(Error::OneSidedResiduals(ResidualSide::Lower));
    }
    let (u, l) = std::thread::scope(|scope| {
        let u = scope.spawn(|| fit(&bound_spec(spec, ResidualSide::Upper), &split.d1));
        let l = fit(&bound_spec(spec, ResidualSide::Lower), &split.d0);
        (u.join().expect("upper bound fit panicked"), l)
    });
    Ok((u?, l?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressor::Activation;

    fn constant_model(c: f64, dim: usize) -> Regressor<f64> {
        let mut p = vec![0.0; dim];
        p.push(c);
        Regressor::from_parameters(RegressorSpec::linear(), dim, p).unwrap()
    }

    #[test]
    fn zero_model_signs() {
        let ds = Dataset::from_rows("e", vec![vec![0.0]; 4], vec![1.0, -1.0, 2.0, -2.0]).unwrap();
        let s = split_residuals(&constant_model(0.0, 1), &ds).unwrap();
        assert_eq!(s.d1.targets(), vec![1.0, 2.0]);
        assert_eq!(s.d0.targets(), vec![1.0, 2.0]);
        assert_eq!(s.d1.ids(), vec![0, 2]);
        assert_eq!(s.d0.ids(), vec![1, 3]);
        assert_eq!(s.parent_n, 4);
    }

    #[test]
    fn perfect_model_ties_go_up() {
        let ds = Dataset::from_rows("e", vec![vec![1.0]; 3], vec![3.5; 3]).unwrap();
        let s = split_residuals(&constant_model(3.5, 1), &ds).unwrap();
        assert_eq!(s.d1.targets(), vec![0.0; 3]);
        assert!(s.d0.is_empty());
    }

    #[test]
    fn errors() {
        let empty = Dataset::<f64>::new("e", 1, vec![]).unwrap();
        assert!(split_residuals(&constant_model(0.0, 1), &empty).is_err());
        let ds = Dataset::from_rows("e", vec![vec![1.0, 2.0]], vec![0.0]).unwrap();
        assert!(matches!(
            split_residuals(&constant_model(0.0, 1), &ds),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn one_sided_names_the_side() {
        let ds = Dataset::from_rows("e", vec![vec![0.0]; 3], vec![1.0, 2.0, 3.0]).unwrap();
        let s = split_residuals(&constant_model(0.0, 1), &ds).unwrap();
        assert!(matches!(
            fit_bound_models(&s, &RegressorSpec::linear()),
            Err(Error::OneSidedResiduals(ResidualSide::Lower))
        ));
    }

    #[test]
    fn constant_residuals_are_realizable() {
        let xs: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 / 30.0 - 1.0]).collect();
        let ys = (0..60).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let ds = Dataset::from_rows("c", xs, ys).unwrap();
        let s = split_residuals(&constant_model(0.0, 1), &ds).unwrap();
        let spec = RegressorSpec::mlp(vec![8], Activation::Tanh).with_training(0.05, 300, 10);
        let (u, l) = fit_bound_models(&s, &spec).unwrap();
        assert!(u.history().final_loss <= 1e-4, "{}", u.history().final_loss);
        assert!(l.history().final_loss <= 1e-4, "{}", l.history().final_loss);
    }
}
