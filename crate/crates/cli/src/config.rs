//! The single TOML run configuration.

use std::path::{Path, PathBuf};

use edgeuq::adaptation::LoopConfig;
use edgeuq::calibration::{BisectOptions, Confidence, DEFAULT_MIN_SEGMENT};
use edgeuq::dataset::SplitSpec;
use edgeuq::driftsim::DriftScenario;
use edgeuq::metrics::OodRule;
use edgeuq::regressor::RegressorSpec;
use serde::Deserialize;

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub split: SplitSpec,
    pub model: RegressorSpec,
    /// Spec for the bound models; defaults to `model`.
    #[serde(default)]
    pub bounds: Option<RegressorSpec>,
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub ood: OodRule,
    #[serde(default)]
    pub scenario: Option<DriftScenario>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(rename = "loop", default)]
    pub adaptation: Option<LoopSection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    #[serde(default = "default_target")]
    pub target: String,
}

fn default_target() -> String {
    "y".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub gamma: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub segments: Option<SegmentSection>,
}

fn default_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SegmentSection {
    /// Equal-population bins over feature `feature` (0-based).
    QuantileBins {
        feature: usize,
        bins: usize,
        #[serde(default = "default_min_segment")]
        min_population: usize,
    },
    /// Labels read from a numeric CSV column, which is then dropped from the features.
    Column {
        column: String,
        #[serde(default = "default_min_segment")]
        min_population: usize,
    },
}

fn default_min_segment() -> usize {
    DEFAULT_MIN_SEGMENT
}

impl SegmentSection {
    pub fn min_population(&self) -> usize {
        match self {
            SegmentSection::QuantileBins { min_population, .. } | SegmentSection::Column { min_population, .. } => {
                *min_population
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub samples: usize,
}

/// Loop settings that are not shared with the other sections.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub initial_size: usize,
    pub window: usize,
    pub windows: usize,
    pub coverage_tolerance: f64,
    pub ood_rate_threshold: f64,
    pub budget: usize,
    pub recency_weight: f64,
    #[serde(default = "default_pool_windows")]
    pub pool_windows: usize,
    pub fine_tune_epochs: usize,
    pub fine_tune_learning_rate: f64,
    pub max_cycles: usize,
    pub recalibration_size: usize,
}

fn default_pool_windows() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

fn invalid(field: &str, why: impl std::fmt::Display) -> Failure {
    Failure::config(format!("{field}: {why}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates every invariant that can be checked without data.
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Failure::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        self.confidence()?;
        if !(self.calibration.tol > 0.0) {
            return Err(invalid("calibration.tol", "must be > 0"));
        }
        if let Some(SegmentSection::QuantileBins { bins, .. }) = &self.calibration.segments {
            if *bins < 1 {
                return Err(invalid("calibration.segments.bins", "must be >= 1"));
            }
        }
        self.split.validate().map_err(|e| invalid("split", e))?;
        self.model.validate().map_err(|e| invalid("model", e))?;
        if let Some(b) = &self.bounds {
            b.validate().map_err(|e| invalid("bounds", e))?;
        }
        self.ood.validate().map_err(|e| invalid("ood", e))?;
        if let Some(s) = &self.scenario {
            s.validate().map_err(|e| invalid("scenario", e))?;
        }
        if self.adaptation.is_some() {
            let (_, initial, cfg) = self.loop_setup()?;
            cfg.validate().map_err(|e| invalid("loop", e))?;
            if initial < cfg.window {
                return Err(invalid("loop.initial_size", "must be >= loop.window"));
            }
        }
        Ok(())
    }

    pub fn confidence(&self) -> Result<Confidence, Failure> {
        Confidence::new(self.calibration.gamma)
            .map_err(|_| invalid("calibration.gamma", format!("{} must lie in (0, 1)", self.calibration.gamma)))
    }

    pub fn bisect_options(&self) -> BisectOptions {
        BisectOptions::default().with_tol(self.calibration.tol)
    }

    pub fn bound_spec(&self) -> &RegressorSpec {
        self.bounds.as_ref().unwrap_or(&self.model)
    }

    pub fn target(&self) -> &str {
        self.data.as_ref().map_or("y", |d| d.target.as_str())
    }

    pub fn data_path(&self, flag: Option<&Path>) -> Result<PathBuf, Failure> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.data.as_ref().and_then(|d| d.path.clone()))
            .ok_or_else(|| invalid("data.path", "no data file given (set data.path or pass --data)"))
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> Result<PathBuf, Failure> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output.as_ref().map(|o| o.dir.clone()))
            .ok_or_else(|| invalid("output.dir", "no output directory given (set output.dir or pass --out)"))
    }

    pub fn scenario(&self) -> Result<&DriftScenario, Failure> {
        self.scenario.as_ref().ok_or_else(|| invalid("scenario", "section is required for this command"))
    }

    /// Scenario, initial training size and the assembled loop configuration.
    pub fn loop_setup(&self) -> Result<(DriftScenario, usize, LoopConfig), Failure> {
        let l = self.adaptation.as_ref().ok_or_else(|| invalid("loop", "section is required for this command"))?;
        let cfg = LoopConfig {
            window: l.window,
            windows: l.windows,
            gamma: self.confidence()?,
            coverage_tolerance: l.coverage_tolerance,
            ood_rate_threshold: l.ood_rate_threshold,
            budget: l.budget,
            recency_weight: l.recency_weight,
            pool_windows: l.pool_windows,
            fine_tune_epochs: l.fine_tune_epochs,
            fine_tune_learning_rate: l.fine_tune_learning_rate,
            max_cycles: l.max_cycles,
            recalibration_size: l.recalibration_size,
            split: self.split,
            model: self.model.clone(),
            bounds: self.bounds.clone(),
            ood: self.ood,
            bisect_tol: self.calibration.tol,
        };
        Ok((self.scenario()?.clone(), l.initial_size, cfg))
    }
}
