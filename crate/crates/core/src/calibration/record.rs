//! `key = value` text record for [`CalibrationResult`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{BisectionDiagnostics, CalibrationResult, Confidence};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CALIBRATION_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "edgeuq-calibration";

impl<T: Scalar> CalibrationResult<T> {
    /// Renders the record. Reals use shortest round-trip formatting, so
    /// `from_text(to_text(r)) == r` exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            writeln!(s, "{k} = {v}").expect("write to string");
        };
        kv("format", &MAGIC);
        kv("format_version", &CALIBRATION_FORMAT_VERSION);
        kv("scalar", &T::NAME);
        kv("gamma", &self.gamma.value());
        kv("alpha", &self.alpha);
        kv("beta", &self.beta);
        kv("parent_n", &self.parent_n);
        kv("target_per_tail", &self.target_per_tail);
        kv("upper_exceedances", &self.upper_exceedances);
        kv("lower_exceedances", &self.lower_exceedances);
        for (side, d) in [("upper", &self.upper_search), ("lower", &self.lower_search)] {
            kv(&format!("{side}_iterations"), &d.iterations);
            kv(&format!("{side}_doublings"), &d.doublings);
            kv(&format!("{side}_bracket_width"), &d.bracket_width);
        }
        kv("f_fingerprint", &self.f_fingerprint);
        kv("u_fingerprint", &self.u_fingerprint);
        kv("l_fingerprint", &self.l_fingerprint);
        if let Some(seg) = &self.segment {
            kv("segment", seg);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::CorruptRecord(m);
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| bad(format!("line {}: expected `key = value`", n + 1)))?;
            if map.insert(k.trim().to_owned(), v.trim().to_owned()).is_some() {
                return Err(bad(format!("duplicate key {k:?}")));
            }
        }
        let mut take = |k: &str| map.remove(k).ok_or_else(|| bad(format!("missing key {k:?}")));
        if take("format")? != MAGIC {
            return Err(bad("not a calibration record".into()));
        }
        let version: u32 = parse(&take("format_version")?, "format_version")?;
        if version != CALIBRATION_FORMAT_VERSION {
            return Err(bad(format!(
                "format version {version} not supported (expected {CALIBRATION_FORMAT_VERSION})"
            )));
        }
        let scalar = take("scalar")?;
        if scalar != T::NAME {
            return Err(bad(format!("scalar {scalar} does not match {}", T::NAME)));
        }
        let gamma = Confidence::new(parse(&take("gamma")?, "gamma")?)?;
        let mut diag = |side: &str| -> Result<BisectionDiagnostics> {
            Ok(BisectionDiagnostics {
                iterations: parse(&take(&format!("{side}_iterations"))?, "iterations")?,
                doublings: parse(&take(&format!("{side}_doublings"))?, "doublings")?,
                bracket_width: parse(&take(&format!("{side}_bracket_width"))?, "bracket_width")?,
            })
        };
        let upper_search = diag("upper")?;
        let lower_search = diag("lower")?;
        let result = CalibrationResult {
            alpha: parse(&take("alpha")?, "alpha")?,
            beta: parse(&take("beta")?, "beta")?,
            gamma,
            parent_n: parse(&take("parent_n")?, "parent_n")?,
            target_per_tail: parse(&take("target_per_tail")?, "target_per_tail")?,
            upper_exceedances: parse(&take("upper_exceedances")?, "upper_exceedances")?,
            lower_exceedances: parse(&take("lower_exceedances")?, "lower_exceedances")?,
            upper_search,
            lower_search,
            f_fingerprint: take("f_fingerprint")?,
            u_fingerprint: take("u_fingerprint")?,
            l_fingerprint: take("l_fingerprint")?,
            segment: map.remove("segment"),
        };
        if let Some(k) = map.keys().next() {
            return Err(bad(format!("unknown key {k:?}")));
        }
        if !(result.alpha >= T::zero() && result.beta >= T::zero()) {
            return Err(bad("negative coefficient".into()));
        }
        Ok(result)
    }
}

fn parse<V: FromStr>(s: &str, key: &str) -> Result<V> {
    s.parse()
        .map_err(|_| Error::CorruptRecord(format!("{key}: cannot parse {s:?}")))
}
