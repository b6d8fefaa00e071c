use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::seed;

/// One entry of the loop's audit trail. Events are totally ordered by
/// `(step, seq)`; `step` is the stream position at emission and `seq` the
/// global emission index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopEvent {
    pub step: u64,
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    WindowEvaluated {
        window: usize,
        start: u64,
        end: u64,
        version: usize,
        picp: f64,
        mpiw: f64,
        ood_rate: f64,
        upper_exceedances: usize,
        lower_exceedances: usize,
    },
    BreachDetected {
        window: usize,
        version: usize,
        picp: f64,
        ood_rate: f64,
        coverage_breach: bool,
        ood_breach: bool,
        /// False once the cycle budget is spent; no adaptation follows.
        handled: bool,
    },
    Curated {
        version: usize,
        pool: usize,
        selected: usize,
        data_fingerprint: String,
    },
    FineTuned {
        version: usize,
        epochs: usize,
        learning_rate: f64,
        mse_before: f64,
        mse_after: f64,
    },
    Recalibrated {
        version: usize,
        start: u64,
        end: u64,
        alpha: f64,
        beta: f64,
        upper_exceedances: usize,
        lower_exceedances: usize,
    },
    Redeployed {
        version: usize,
        parent: usize,
    },
    /// The cycle for `version` was abandoned; the previous version stays live.
    CalibrationFailed {
        version: usize,
        stage: String,
        error: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::WindowEvaluated { .. } => "window-evaluated",
            EventKind::BreachDetected { .. } => "breach-detected",
            EventKind::Curated { .. } => "curated",
            EventKind::FineTuned { .. } => "fine-tuned",
            EventKind::Recalibrated { .. } => "recalibrated",
            EventKind::Redeployed { .. } => "redeployed",
            EventKind::CalibrationFailed { .. } => "calibration-failed",
        }
    }
}

/// Line-delimited JSON, one event per line.
pub fn events_to_jsonl(events: &[LoopEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

pub fn events_from_jsonl(text: &str) -> Result<Vec<LoopEvent>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

pub fn events_fingerprint(events: &[LoopEvent]) -> String {
    seed::digest(events_to_jsonl(events).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let events = vec![
            LoopEvent {
                step: 10,
                seq: 0,
                kind: EventKind::Redeployed { version: 1, parent: 0 },
            },
            LoopEvent {
                step: 10,
                seq: 1,
                kind: EventKind::FineTuned {
                    version: 2,
                    epochs: 3,
                    learning_rate: 0.1,
                    mse_before: 1.0 / 3.0,
                    mse_after: 0.25,
                },
            },
        ];
        let text = events_to_jsonl(&events);
        assert!(text.lines().next().unwrap().contains("\"kind\":\"redeployed\""));
        assert_eq!(events_from_jsonl(&text).unwrap(), events);
    }
}
