//! Samples, datasets and the data operations around them: CSV ingestion,
//! train/calibration/test splitting, segment assignment and
//! uncertainty-driven curation.

mod csvio;
mod curate;
mod segment;
mod split;

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use csvio::{load_csv, read_csv, save_csv, write_csv};
pub use curate::curate_uncertain;
pub use segment::{assign_segments, quantile, SegmentRule, Segmenter};
pub use split::{split, SplitSpec};

/// One observation: feature vector `x`, scalar target `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub id: u64,
    pub x: Vec<T>,
    pub y: T,
    pub segment: Option<String>,
}

impl<T: Scalar> Sample<T> {
    pub fn new(id: u64, x: Vec<T>, y: T) -> Self {
        Sample {
            id,
            x,
            y,
            segment: None,
        }
    }

    pub fn with_segment(mut self, segment: impl Into<String>) -> Self {
        self.segment = Some(segment.into());
        self
    }

    fn is_finite(&self) -> bool {
        self.y.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

/// An ordered collection of samples sharing one feature dimension.
///
/// Row order is meaningful: it is treated as stream (time) order by curation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    name: String,
    dim: usize,
    feature_names: Vec<String>,
    target_name: String,
    samples: Vec<Sample<T>>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset, validating dimension, finiteness and id uniqueness.
    pub fn new(name: impl Into<String>, dim: usize, samples: Vec<Sample<T>>) -> Result<Self> {
        let feature_names = (0..dim).map(|j| format!("x{j}")).collect();
        Self::with_names(name, feature_names, "y", samples)
    }

    pub fn with_names(
        name: impl Into<String>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        samples: Vec<Sample<T>>,
    ) -> Result<Self> {
        let dim = feature_names.len();
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.x.len(),
                });
            }
            if !s.is_finite() {
                return Err(Error::NonFinite { id: s.id });
            }
            if !seen.insert(s.id) {
                return Err(Error::DuplicateId(s.id));
            }
        }
        Ok(Dataset {
            name: name.into(),
            dim,
            feature_names,
            target_name: target_name.into(),
            samples,
        })
    }

    /// Convenience constructor from parallel feature rows and targets; ids are row indices.
    pub fn from_rows(name: impl Into<String>, xs: Vec<Vec<T>>, ys: Vec<T>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let dim = xs.first().map_or(0, Vec::len);
        let samples = xs
            .into_iter()
            .zip(ys)
            .enumerate()
            .map(|(i, (x, y))| Sample::new(i as u64, x, y))
            .collect();
        Self::new(name, dim, samples)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample<T>> {
        self.samples.iter()
    }

    pub fn targets(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.id).collect()
    }

    /// Segment labels, when every sample carries one.
    pub fn segments(&self) -> Option<Vec<String>> {
        self.samples.iter().map(|s| s.segment.clone()).collect()
    }

    /// Same schema, different samples. Samples are re-validated.
    pub fn derive(&self, name: impl Into<String>, samples: Vec<Sample<T>>) -> Result<Self> {
        Self::with_names(
            name,
            self.feature_names.clone(),
            self.target_name.clone(),
            samples,
        )
    }

    pub fn rename(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Appends another dataset with the same dimension; ids must stay unique.
    pub fn concat(&self, other: &Dataset<T>) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        self.derive(self.name.clone(), samples)
    }

    /// Samples whose segment label equals `label`, in order.
    pub fn filter_segment(&self, label: &str) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .filter(|s| s.segment.as_deref() == Some(label))
            .cloned()
            .collect();
        self.derive(format!("{}[{label}]", self.name), samples)
    }
}

impl<'a, T> IntoIterator for &'a Dataset<T> {
    type Item = &'a Sample<T>;
    type IntoIter = std::slice::Iter<'a, Sample<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}
