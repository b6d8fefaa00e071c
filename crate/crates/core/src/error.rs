use std::path::PathBuf;

use thiserror::Error;

pub type Result<R, E = Error> = std::result::Result<R, E>;

/// Which residual dataset came out empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualSide {
    /// `y >= f(x)`, trains the upper bound model.
    Upper,
    /// `y < f(x)`, trains the lower bound model.
    Lower,
}

impl std::fmt::Display for ResidualSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResidualSide::Upper => f.write_str("upper (d1)"),
            ResidualSide::Lower => f.write_str("lower (d0)"),
        }
    }
}

/// Coarse error class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Calibration,
    Io,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Calibration => "calibration",
            ErrorClass::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("csv has no header row")]
    MissingHeader,
    #[error("duplicate header name {0:?}")]
    DuplicateHeader(String),
    #[error("target column {0:?} not in header")]
    MissingTargetColumn(String),
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a finite real")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample {id} has a non-finite value")]
    NonFinite { id: u64 },
    #[error("duplicate sample id {0}")]
    DuplicateId(u64),
    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid segment rule: {0}")]
    InvalidSegmentRule(String),
    #[error("curation budget {budget} exceeds pool size {pool}")]
    BudgetTooLarge { budget: usize, pool: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid regressor spec: {0}")]
    InvalidSpec(String),
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Divergence { epoch: usize },
    #[error("normal equations are singular; add an L2 penalty")]
    SingularSystem,
    #[error("unsupported model kind for this operation: {0}")]
    UnsupportedKind(&'static str),
    #[error("model format version {found} not supported (expected {supported})")]
    ModelVersion { found: u32, supported: u32 },
    #[error("corrupted model payload: {0}")]
    CorruptModel(String),

    #[error("one-sided residuals: the {0} residual set is empty")]
    OneSidedResiduals(ResidualSide),
    #[error("confidence must lie strictly inside (0, 1), got {0}")]
    InvalidConfidence(f64),
    #[error("coefficient must be nonnegative, got {0}")]
    NegativeCoefficient(f64),
    #[error("{what} fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("bisection could not bracket a root after {doublings} doublings (upper bound {upper})")]
    BracketNotFound { doublings: usize, upper: f64 },
    #[error("counting function is not monotone near {at}")]
    NonMonotone { at: f64 },
    #[error("bisection did not reach tolerance within {iterations} iterations")]
    BisectionNotConverged { iterations: usize },
    #[error("no segment meets the minimum population and no global calibration is available")]
    NoUsableCalibration,
    #[error("malformed calibration record: {0}")]
    CorruptRecord(String),

    #[error("ood rule has no learned reference quantile")]
    UnlearnedOodRule,
    #[error("invalid ood rule: {0}")]
    InvalidOodRule(String),

    #[error("invalid drift scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid loop config: {0}")]
    InvalidLoopConfig(String),
    #[error("manifest format version {found} not supported (expected {supported})")]
    ManifestVersion { found: u32, supported: u32 },
    #[error("corrupted manifest: {0}")]
    CorruptManifest(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            MissingFile(_) | Io(_) => ErrorClass::Io,
            MissingHeader | DuplicateHeader(_) | MissingTargetColumn(_) | BadCell { .. } | Csv(_)
            | DimensionMismatch { .. } | NonFinite { .. } | DuplicateId(_) | EmptyDataset(_)
            | LengthMismatch { .. } | BudgetTooLarge { .. } | CorruptModel(_)
            | ModelVersion { .. } | CorruptRecord(_) | CorruptManifest(_)
            | ManifestVersion { .. } | Json(_) => ErrorClass::Data,
            InvalidSplit(_) | InvalidSegmentRule(_) | InvalidArgument(_) | InvalidSpec(_)
            | UnsupportedKind(_) | InvalidConfidence(_) | InvalidOodRule(_)
            | InvalidScenario(_) | InvalidLoopConfig(_) => ErrorClass::Config,
            Divergence { .. } | SingularSystem | OneSidedResiduals(_) | NegativeCoefficient(_)
            | FingerprintMismatch { .. } | BracketNotFound { .. } | NonMonotone { .. }
            | BisectionNotConverged { .. } | NoUsableCalibration | UnlearnedOodRule => {
                ErrorClass::Calibration
            }
        }
    }
}
