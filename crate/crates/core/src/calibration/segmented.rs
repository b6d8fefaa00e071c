use std::collections::BTreeMap;

use super::{calibrate, BisectOptions, CalibratedModel, Confidence, PredictionInterval};
use crate::dataset::{Dataset, Segmenter};
use crate::error::{Error, Result};
use crate::regressor::{Regressor, RegressorSpec};
use crate::residuals::split_residuals;
use crate::scalar::Scalar;

pub const DEFAULT_MIN_SEGMENT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentCalibration<T> {
    pub model: CalibratedModel<T>,
    pub population: usize,
    /// The segment was too small and uses the global calibration instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedCalibration<T> {
    pub global: Option<CalibratedModel<T>>,
    pub segments: BTreeMap<String, SegmentCalibration<T>>,
}

impl<T: Scalar> SegmentedCalibration<T> {
    /// Interval from the segment's calibration, or the global one for
    /// unknown labels.
    pub fn predict(&self, x: &[T], segment: Option<&str>) -> Result<PredictionInterval<T>> {
        self.model_for(segment)
            .ok_or(Error::NoUsableCalibration)?
            .predict(x)
    }

    pub fn predict_with(&self, segmenter: &Segmenter, x: &[T]) -> Result<PredictionInterval<T>> {
        let label = segmenter.label(x);
        self.predict(x, label.as_deref())
    }

    pub fn model_for(&self, segment: Option<&str>) -> Option<&CalibratedModel<T>> {
        segment
            .and_then(|s| self.segments.get(s))
            .map(|s| &s.model)
            .or(self.global.as_ref())
    }
}

/// Calibrates each segment of `edge` independently. Segments with fewer than
/// `min_population` samples fall back to the calibration over all of `edge`
/// and are flagged.
pub fn calibrate_per_segment<T: Scalar>(
    f: &Regressor<T>,
    edge: &Dataset<T>,
    spec: &RegressorSpec,
    gamma: Confidence,
    opts: &BisectOptions,
    min_population: usize,
) -> Result<SegmentedCalibration<T>> {
    let labels = edge.segments().ok_or_else(|| {
        Error::InvalidArgument("every sample needs a segment label".into())
    })?;
    let global = split_residuals(f, edge)
        .and_then(|split| calibrate(f, &split, spec, gamma, opts))
        .ok();

    let mut populations: BTreeMap<String, usize> = BTreeMap::new();
    for l in labels {
        *populations.entry(l).or_default() += 1;
    }
    let mut segments = BTreeMap::new();
    for (label, population) in populations {
        let entry = if population >= min_population {
            let subset = edge.filter_segment(&label)?;
            let split = split_residuals(f, &subset)?;
            let mut model = calibrate(f, &split, spec, gamma, opts)?;
            model.result.segment = Some(label.clone());
            SegmentCalibration {
                model,
                population,
                fallback: false,
            }
        } else {
            let model = global.clone().ok_or(Error::NoUsableCalibration)?;
            SegmentCalibration {
                model,
                population,
                fallback: true,
            }
        };
        segments.insert(label, entry);
    }
    Ok(SegmentedCalibration { global, segments })
}
