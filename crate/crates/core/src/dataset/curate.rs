use std::cmp::Ordering;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Picks the `budget` pool samples with the highest blended score
/// `(1 - w) * normalized_width + w * normalized_recency`, where recency is
/// position in pool order. Ties go to the smaller id. The result keeps pool order.
pub fn curate_uncertain<T: Scalar>(
    pool: &Dataset<T>,
    widths: &[T],
    budget: usize,
    recency_weight: f64,
) -> Result<Dataset<T>> {
    let n = pool.len();
    if widths.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: widths.len(),
        });
    }
    if budget > n {
        return Err(Error::BudgetTooLarge { budget, pool: n });
    }
    if !(0.0..=1.0).contains(&recency_weight) {
        return Err(Error::InvalidArgument(format!(
            "recency weight {recency_weight} outside [0, 1]"
        )));
    }

    let w: Vec<f64> = widths.iter().map(|v| v.as_f64()).collect();
    let (lo, hi) = w
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let score = |i: usize| {
        let nw = if span > 0.0 { (w[i] - lo) / span } else { 0.0 };
        let nr = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        (1.0 - recency_weight) * nw + recency_weight * nr
    };

    let samples = pool.samples();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        score(b)
            .partial_cmp(&score(a))
            .unwrap_or(Ordering::Equal)
            .then(samples[a].id.cmp(&samples[b].id))
    });
    let mut chosen = order[..budget].to_vec();
    chosen.sort_unstable();
    pool.derive(
        format!("{}-curated", pool.name()),
        chosen.into_iter().map(|i| samples[i].clone()).collect(),
    )
}
