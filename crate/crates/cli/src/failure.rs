use std::fmt;

use edgeuq::{Error, ErrorClass};

/// A command failure: an error class for the exit code plus a human detail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub class: ErrorClass,
    pub detail: String,
}

impl Failure {
    pub fn config(detail: impl Into<String>) -> Self {
        Failure { class: ErrorClass::Config, detail: detail.into() }
    }

    pub fn io(detail: impl Into<String>) -> Self {
        Failure { class: ErrorClass::Io, detail: detail.into() }
    }

    pub fn data(detail: impl Into<String>) -> Self {
        Failure { class: ErrorClass::Data, detail: detail.into() }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.class)
    }
}

/// Process exit code per error class; 2 is left to argument parsing.
pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => 3,
        ErrorClass::Data => 4,
        ErrorClass::Calibration => 5,
        ErrorClass::Io => 6,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { class: e.class(), detail: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::io(e.to_string())
    }
}

impl fmt::Display for Failure {
    /// One line: `error class=<class> detail=<text>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail = self.detail.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error class={} detail={}", self.class.as_str(), detail)
    }
}

impl std::error::Error for Failure {}
