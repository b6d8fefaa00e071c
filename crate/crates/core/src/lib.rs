// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod calibration;
pub mod dataset;
pub mod driftsim;
pub mod error;
pub mod metrics;
pub mod regressor;
pub mod residuals;
pub mod scalar;
pub mod seed;

pub use adaptation::{replay, run_loop, LoopConfig, LoopEvent, LoopOutcome, ModelRegistry, RunManifest};
pub use calibration::{calibrate, BisectOptions, CalibratedModel, CalibrationResult, Confidence, PredictionInterval};
pub use dataset::{Dataset, Sample, SplitSpec};
pub use driftsim::{make_stream, DriftScenario};
pub use error::{Error, ErrorClass, Result};
pub use metrics::{evaluate, IntervalReport, OodRule};
pub use regressor::{fine_tune, fit, Regressor, RegressorSpec};
pub use residuals::{split_residuals, ResidualSplit};
pub use scalar::Scalar;

pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type RegressorF64 = Regressor<f64>;
pub type RegressorF32 = Regressor<f32>;
pub type ResidualSplitF64 = ResidualSplit<f64>;
pub type ResidualSplitF32 = ResidualSplit<f32>;
pub type CalibratedModelF64 = CalibratedModel<f64>;
pub type CalibratedModelF32 = CalibratedModel<f32>;
pub type CalibrationResultF64 = CalibrationResult<f64>;
pub type CalibrationResultF32 = CalibrationResult<f32>;
pub type IntervalF64 = PredictionInterval<f64>;
pub type IntervalF32 = PredictionInterval<f32>;
pub type RegistryF64 = ModelRegistry<f64>;
pub type RegistryF32 = ModelRegistry<f32>;
