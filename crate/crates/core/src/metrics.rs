//! Interval quality (coverage and width) and the width-based OOD flag.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::calibration::PredictionInterval;
use crate::dataset::quantile;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub n: usize,
    pub covered: usize,
    pub picp: f64,
    pub mpiw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub n: usize,
    pub covered: usize,
    /// Fraction of targets inside their closed interval.
    pub picp: f64,
    /// Mean interval width.
    pub mpiw: f64,
    pub width_median: f64,
    pub width_p90: f64,
    pub width_p99: f64,
    /// Targets strictly above the upper bound.
    pub upper_exceedances: usize,
    /// Targets strictly below the lower bound.
    pub lower_exceedances: usize,
    pub segments: BTreeMap<String, SegmentReport>,
}

pub fn evaluate<T: Scalar>(
    intervals: &[PredictionInterval<T>],
    ys: &[T],
    segments: Option<&[String]>,
) -> Result<IntervalReport> {
    if intervals.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: intervals.len(),
            got: ys.len(),
        });
    }
    if let Some(s) = segments {
        if s.len() != ys.len() {
            return Err(Error::LengthMismatch {
                expected: ys.len(),
                got: s.len(),
            });
        }
    }
    if ys.is_empty() {
        return Err(Error::EmptyDataset("interval evaluation"));
    }

    let n = ys.len();
    let mut covered = 0;
    let (mut upper, mut lower) = (0, 0);
    let mut widths = Vec::with_capacity(n);
    let mut per: BTreeMap<String, (usize, usize, f64)> = BTreeMap::new();
    for (i, (pi, &y)) in intervals.iter().zip(ys).enumerate() {
        let inside = pi.contains(y);
        covered += usize::from(inside);
        upper += usize::from(y > pi.upper);
        lower += usize::from(y < pi.lower);
        let w = pi.width.as_f64();
        widths.push(w);
        if let Some(s) = segments {
            let e = per.entry(s[i].clone()).or_default();
            e.0 += 1;
            e.1 += usize::from(inside);
            e.2 += w;
        }
    }
    let mpiw = widths.iter().sum::<f64>() / n as f64;
    widths.sort_by(f64::total_cmp);
    Ok(IntervalReport {
        n,
        covered,
        picp: covered as f64 / n as f64,
        mpiw,
        width_median: quantile(&widths, 0.5),
        width_p90: quantile(&widths, 0.9),
        width_p99: quantile(&widths, 0.99),
        upper_exceedances: upper,
        lower_exceedances: lower,
        segments: per
            .into_iter()
            .map(|(k, (n, c, w))| {
                (
                    k,
                    SegmentReport {
                        n,
                        covered: c,
                        picp: c as f64 / n as f64,
                        mpiw: w / n as f64,
                    },
                )
            })
            .collect(),
    })
}

impl IntervalReport {
    /// Machine-readable `key = value` lines; segment keys are `segment.<label>.<field>`.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            writeln!(s, "{k} = {v}").expect("write to string");
        };
        kv("n", &self.n);
        kv("covered", &self.covered);
        kv("picp", &self.picp);
        kv("mpiw", &self.mpiw);
        kv("width_median", &self.width_median);
        kv("width_p90", &self.width_p90);
        kv("width_p99", &self.width_p99);
        kv("upper_exceedances", &self.upper_exceedances);
        kv("lower_exceedances", &self.lower_exceedances);
        for (label, r) in &self.segments {
            kv(&format!("segment.{label}.n"), &r.n);
            kv(&format!("segment.{label}.covered"), &r.covered);
            kv(&format!("segment.{label}.picp"), &r.picp);
            kv(&format!("segment.{label}.mpiw"), &r.mpiw);
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<12} {:>8} {:>8} {:>10} {:>12}", "segment", "n", "covered", "picp", "mpiw").unwrap();
        let mut row = |label: &str, n: usize, c: usize, p: f64, w: f64| {
            writeln!(s, "{label:<12} {n:>8} {c:>8} {p:>10.4} {w:>12.6}").unwrap();
        };
        for (label, r) in &self.segments {
            row(label, r.n, r.covered, r.picp, r.mpiw);
        }
        row("all", self.n, self.covered, self.picp, self.mpiw);
        writeln!(
            s,
            "width quantiles: median {:.6}  p90 {:.6}  p99 {:.6}",
            self.width_median, self.width_p90, self.width_p99
        )
        .unwrap();
        writeln!(
            s,
            "exceedances: upper {}  lower {}",
            self.upper_exceedances, self.lower_exceedances
        )
        .unwrap();
        s
    }
}

/// Flags an input as out of distribution when its interval is wider than
/// `multiplier` times a calibration-time width quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodRule {
    pub quantile: f64,
    pub multiplier: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
}

impl Default for OodRule {
    fn default() -> Self {
        OodRule {
            quantile: 0.99,
            multiplier: 1.0,
            reference: None,
        }
    }
}

impl OodRule {
    pub fn new(quantile: f64, multiplier: f64) -> Result<Self> {
        let rule = OodRule {
            quantile,
            multiplier,
            reference: None,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::InvalidOodRule(format!(
                "quantile level {} outside (0, 1)",
                self.quantile
            )));
        }
        if !(self.multiplier > 0.0 && self.multiplier.is_finite()) {
            return Err(Error::InvalidOodRule(format!(
                "multiplier {} must be positive",
                self.multiplier
            )));
        }
        Ok(())
    }

    pub fn threshold(&self) -> Result<f64> {
        self.reference
            .map(|r| r * self.multiplier)
            .ok_or(Error::UnlearnedOodRule)
    }
}

/// Stores the empirical `rule.quantile` of the calibration widths.
pub fn learn_ood_reference<T: Scalar>(widths: &[T], rule: &OodRule) -> Result<OodRule> {
    rule.validate()?;
    if widths.is_empty() {
        return Err(Error::EmptyDataset("ood reference widths"));
    }
    let mut w: Vec<f64> = widths.iter().map(|v| v.as_f64()).collect();
    w.sort_by(f64::total_cmp);
    Ok(OodRule {
        reference: Some(quantile(&w, rule.quantile)),
        ..*rule
    })
}

/// True iff the interval is strictly wider than the rule's threshold.
pub fn ood_flag<T: Scalar>(interval: &PredictionInterval<T>, rule: &OodRule) -> Result<bool> {
    Ok(interval.width.as_f64() > rule.threshold()?)
}
