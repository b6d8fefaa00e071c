use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How samples are grouped into sections that get their own calibration.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentRule {
    /// Equal-population bins over one feature's empirical quantiles.
    QuantileBins { feature: usize, bins: usize },
    /// Labels supplied verbatim, aligned with the dataset's samples.
    Provided(Vec<String>),
}

/// A fitted segment rule that can label future inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Segmenter {
    QuantileBins { feature: usize, edges: Vec<f64> },
    Provided { labels: Vec<String> },
}

impl Segmenter {
    /// Label for a new input. Provided-label segmenters cannot label unseen data.
    pub fn label<T: Scalar>(&self, x: &[T]) -> Option<String> {
        match self {
            Segmenter::QuantileBins { feature, edges } => {
                let v = x.get(*feature)?.as_f64();
                Some(bin_label(edges.iter().filter(|&&e| v > e).count()))
            }
            Segmenter::Provided { .. } => None,
        }
    }

    /// All labels this segmenter can produce, in order.
    pub fn labels(&self) -> Vec<String> {
        match self {
            Segmenter::QuantileBins { edges, .. } => (0..=edges.len()).map(bin_label).collect(),
            Segmenter::Provided { labels } => {
                let mut l = labels.clone();
                l.sort();
                l.dedup();
                l
            }
        }
    }
}

fn bin_label(k: usize) -> String {
    format!("bin{k}")
}

/// Empirical quantile of sorted data, linear interpolation between order
/// statistics at position `(n - 1) * q`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Labels every sample and returns the fitted segmenter so the same edges can
/// be applied to later data.
pub fn assign_segments<T: Scalar>(
    ds: &Dataset<T>,
    rule: &SegmentRule,
) -> Result<(Dataset<T>, Segmenter)> {
    let segmenter = match rule {
        SegmentRule::QuantileBins { feature, bins } => {
            if *bins < 1 {
                return Err(Error::InvalidSegmentRule("bin count must be >= 1".into()));
            }
            if *feature >= ds.dim() {
                return Err(Error::InvalidSegmentRule(format!(
                    "feature index {feature} out of range for dimension {}",
                    ds.dim()
                )));
            }
            let mut values: Vec<f64> = ds.iter().map(|s| s.x[*feature].as_f64()).collect();
            values.sort_by(f64::total_cmp);
            let edges = if values.is_empty() {
                Vec::new()
            } else {
                (1..*bins)
                    .map(|k| quantile(&values, k as f64 / *bins as f64))
                    .collect()
            };
            Segmenter::QuantileBins {
                feature: *feature,
                edges,
            }
        }
        SegmentRule::Provided(labels) => {
            if labels.len() != ds.len() {
                return Err(Error::LengthMismatch {
                    expected: ds.len(),
                    got: labels.len(),
                });
            }
            Segmenter::Provided {
                labels: labels.clone(),
            }
        }
    };
    let samples = ds
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let label = match &segmenter {
                Segmenter::Provided { labels } => labels[i].clone(),
                seg => seg.label(&s.x).expect("feature index validated"),
            };
            s.clone().with_segment(label)
        })
        .collect();
    Ok((ds.derive(ds.name().to_owned(), samples)?, segmenter))
}
