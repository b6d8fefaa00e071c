//! The monitor / curate / fine-tune / recalibrate / redeploy cycle over a
//! drifting stream.

mod events;
mod manifest;
mod registry;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, BisectOptions, CalibratedModel, Confidence};
use crate::dataset::{curate_uncertain, split, write_csv, Dataset, SplitSpec};
use crate::driftsim::{make_stream, DriftScenario, Stream};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, learn_ood_reference, ood_flag, OodRule};
use crate::regressor::{fine_tune, fit, RegressorSpec};
use crate::residuals::split_residuals;
use crate::scalar::Scalar;
use crate::seed;

pub use events::{events_fingerprint, events_from_jsonl, events_to_jsonl, EventKind, LoopEvent};
pub use manifest::{
    load_run, persist_run, replay, run_fingerprint, RunManifest, VersionRecord, CYCLE_COMPLETION,
    MANIFEST_FORMAT_VERSION,
};
pub use registry::{ModelRegistry, Provenance, RegistryEntry};

fn default_pool_windows() -> usize {
    1
}

fn default_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    /// Samples per monitoring window.
    pub window: usize,
    /// Monitoring windows to run after bootstrap.
    pub windows: usize,
    pub gamma: Confidence,
    /// Breach when window PICP < gamma - coverage_tolerance.
    pub coverage_tolerance: f64,
    /// Breach when the OOD flag rate exceeds this.
    pub ood_rate_threshold: f64,
    /// Samples curated per cycle.
    pub budget: usize,
    pub recency_weight: f64,
    /// Most recent windows forming the curation pool.
    #[serde(default = "default_pool_windows")]
    pub pool_windows: usize,
    pub fine_tune_epochs: usize,
    pub fine_tune_learning_rate: f64,
    pub max_cycles: usize,
    /// Fresh stream samples drawn to recalibrate each new version.
    pub recalibration_size: usize,
    #[serde(default)]
    pub split: SplitSpec,
    pub model: RegressorSpec,
    /// Spec for u and l; defaults to `model`.
    #[serde(default)]
    pub bounds: Option<RegressorSpec>,
    #[serde(default)]
    pub ood: OodRule,
    #[serde(default = "default_tol")]
    pub bisect_tol: f64,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidLoopConfig(m));
        if self.window < 1 {
            return bad("window must be >= 1".into());
        }
        let g = self.gamma.value();
        if !(self.coverage_tolerance > 0.0 && self.coverage_tolerance < g) {
            return bad(format!("coverage_tolerance must lie in (0, {g})"));
        }
        if !(self.ood_rate_threshold > 0.0 && self.ood_rate_threshold < 1.0) {
            return bad("ood_rate_threshold must lie in (0, 1)".into());
        }
        if self.budget < 1 || self.budget > self.window {
            return bad("budget must lie in [1, window]".into());
        }
        if !(0.0..=1.0).contains(&self.recency_weight) {
            return bad("recency_weight must lie in [0, 1]".into());
        }
        if self.pool_windows < 1 {
            return bad("pool_windows must be >= 1".into());
        }
        if !(self.fine_tune_learning_rate > 0.0 && self.fine_tune_learning_rate.is_finite()) {
            return bad("fine_tune_learning_rate must be > 0".into());
        }
        if self.recalibration_size < 2 {
            return bad("recalibration_size must be >= 2".into());
        }
        if !(self.bisect_tol > 0.0) {
            return bad("bisect_tol must be > 0".into());
        }
        self.split.validate()?;
        self.model.validate()?;
        if let Some(b) = &self.bounds {
            b.validate()?;
        }
        self.ood.validate()
    }

    pub fn bound_spec(&self) -> &RegressorSpec {
        self.bounds.as_ref().unwrap_or(&self.model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSummary {
    pub versions: usize,
    pub windows: usize,
    pub breaches: usize,
    pub redeploys: usize,
    pub failures: usize,
    pub final_picp: f64,
    pub stream_end: u64,
}

impl LoopSummary {
    fn from_events(events: &[LoopEvent], versions: usize, stream_end: u64) -> Self {
        let count = |name: &str| events.iter().filter(|e| e.kind.name() == name).count();
        let final_picp = events
            .iter()
            .rev()
            .find_map(|e| match e.kind {
                EventKind::WindowEvaluated { picp, .. } => Some(picp),
                _ => None,
            })
            .unwrap_or(f64::NAN);
        LoopSummary {
            versions,
            windows: count("window-evaluated"),
            breaches: count("breach-detected"),
            redeploys: count("redeployed"),
            failures: count("calibration-failed"),
            final_picp,
            stream_end,
        }
    }

    pub fn to_table(&self) -> String {
        format!(
            "versions   {}\nwindows    {}\nbreaches   {}\nredeploys  {}\nfailures   {}\nfinal picp {:.4}\n",
            self.versions, self.windows, self.breaches, self.redeploys, self.failures, self.final_picp
        )
    }
}

#[derive(Debug, Clone)]
pub struct LoopOutcome<T> {
    pub registry: ModelRegistry<T>,
    pub events: Vec<LoopEvent>,
    pub manifest: RunManifest,
}

fn data_fingerprint<T: Scalar>(parts: &[&Dataset<T>]) -> String {
    let mut bytes = Vec::new();
    for ds in parts {
        write_csv(ds, &mut bytes).expect("in-memory csv");
    }
    seed::digest(&bytes)
}

struct Log {
    events: Vec<LoopEvent>,
}

impl Log {
    fn emit(&mut self, step: u64, kind: EventKind) -> u64 {
        let seq = self.events.len() as u64;
        self.events.push(LoopEvent { step, seq, kind });
        seq
    }
}

struct Window<T> {
    data: Dataset<T>,
    widths: Vec<T>,
}

/// Bootstraps version 0 from the first `initial_size` stream samples, then
/// monitors `config.windows` windows, adapting on breaches until
/// `config.max_cycles` cycles have run. Monitoring continues after the
/// cycle budget is spent.
pub fn run_loop<T: Scalar>(
    scenario: &DriftScenario,
    initial_size: usize,
    config: &LoopConfig,
) -> Result<LoopOutcome<T>> {
    config.validate()?;
    if initial_size < config.window {
        return Err(Error::InvalidLoopConfig(format!(
            "initial training size {initial_size} is below the window size {}",
            config.window
        )));
    }
    let mut stream = make_stream(scenario)?;
    let opts = BisectOptions::default().with_tol(config.bisect_tol);

    let initial = stream.next_batch::<T>(initial_size)?.samples;
    let (train, cal, _) = split(&initial, &config.split)?;
    let f0 = fit(&config.model, &train)?;
    let residuals = split_residuals(&f0, &cal)?;
    let v0 = calibrate(&f0, &residuals, config.bound_spec(), config.gamma, &opts)?;
    let ood0 = learn_widths(&v0, &cal, &config.ood)?;
    let mut registry = ModelRegistry::new(
        v0,
        ood0,
        Provenance {
            parent: None,
            trigger: None,
            data_fingerprint: data_fingerprint(&[&train, &cal]),
            deployed_at: stream.position(),
        },
    )?;

    let mut log = Log { events: Vec::new() };
    let mut pool: VecDeque<Window<T>> = VecDeque::new();
    let mut cycles = 0;
    let threshold = config.gamma.value() - config.coverage_tolerance;
    for window in 0..config.windows {
        let batch = stream.next_batch::<T>(config.window)?;
        let live = registry.latest();
        let intervals = live.model.predict_dataset(&batch.samples)?;
        let report = evaluate(&intervals, &batch.samples.targets(), None)?;
        let mut flagged = 0;
        for pi in &intervals {
            flagged += usize::from(ood_flag(pi, &live.ood)?);
        }
        let ood_rate = flagged as f64 / intervals.len() as f64;
        let version = live.version;
        log.emit(
            batch.end,
            EventKind::WindowEvaluated {
                window,
                start: batch.start,
                end: batch.end,
                version,
                picp: report.picp,
                mpiw: report.mpiw,
                ood_rate,
                upper_exceedances: report.upper_exceedances,
                lower_exceedances: report.lower_exceedances,
            },
        );
        pool.push_back(Window {
            widths: intervals.iter().map(|pi| pi.width).collect(),
            data: batch.samples,
        });
        while pool.len() > config.pool_windows {
            pool.pop_front();
        }

        let coverage_breach = report.picp < threshold;
        let ood_breach = ood_rate > config.ood_rate_threshold;
        if !(coverage_breach || ood_breach) {
            continue;
        }
        let handled = cycles < config.max_cycles;
        let trigger = log.emit(
            batch.end,
            EventKind::BreachDetected {
                window,
                version,
                picp: report.picp,
                ood_rate,
                coverage_breach,
                ood_breach,
                handled,
            },
        );
        if handled {
            cycles += 1;
            adapt(&mut registry, &mut stream, &mut log, &pool, trigger, batch.end, config, &opts)?;
            pool.clear();
        }
    }

    let summary = LoopSummary::from_events(&log.events, registry.len(), stream.position());
    let manifest = RunManifest::build::<T>(scenario, initial_size, config, &registry, &log.events, summary);
    Ok(LoopOutcome {
        registry,
        events: log.events,
        manifest,
    })
}

fn learn_widths<T: Scalar>(model: &CalibratedModel<T>, data: &Dataset<T>, rule: &OodRule) -> Result<OodRule> {
    let widths: Vec<T> = model.predict_dataset(data)?.iter().map(|pi| pi.width).collect();
    learn_ood_reference(&widths, rule)
}

/// One breach-handling cycle. Failures after curation are logged and leave
/// the live version in place; only stream or data-shape errors propagate.
#[allow(clippy::too_many_arguments)]
fn adapt<T: Scalar>(
    registry: &mut ModelRegistry<T>,
    stream: &mut Stream,
    log: &mut Log,
    pool: &VecDeque<Window<T>>,
    trigger: u64,
    step: u64,
    config: &LoopConfig,
    opts: &BisectOptions,
) -> Result<()> {
    let parent = registry.latest().version;
    let version = registry.len();
    let mut pooled = pool[0].data.clone();
    let mut widths = pool[0].widths.clone();
    for w in pool.iter().skip(1) {
        pooled = pooled.concat(&w.data)?;
        widths.extend_from_slice(&w.widths);
    }
    let curated = curate_uncertain(&pooled, &widths, config.budget, config.recency_weight)?;
    let curated_fp = data_fingerprint(&[&curated]);
    log.emit(
        step,
        EventKind::Curated {
            version,
            pool: pooled.len(),
            selected: curated.len(),
            data_fingerprint: curated_fp,
        },
    );
    let fail = |log: &mut Log, step: u64, stage: &str, e: Error| {
        log.emit(
            step,
            EventKind::CalibrationFailed {
                version,
                stage: stage.to_owned(),
                error: e.to_string(),
            },
        );
    };

    let live_f = &registry.latest().model.f;
    let f = match fine_tune(live_f, &curated, config.fine_tune_epochs, config.fine_tune_learning_rate) {
        Ok(f) => f,
        Err(e) => {
            fail(log, step, "fine-tune", e);
            return Ok(());
        }
    };
    log.emit(
        step,
        EventKind::FineTuned {
            version,
            epochs: config.fine_tune_epochs,
            learning_rate: config.fine_tune_learning_rate,
            mse_before: live_f.mse(&curated)?,
            mse_after: f.mse(&curated)?,
        },
    );

    let fresh = stream.next_batch::<T>(config.recalibration_size)?;
    let model = match split_residuals(&f, &fresh.samples)
        .and_then(|r| calibrate(&f, &r, config.bound_spec(), config.gamma, opts))
    {
        Ok(m) => m,
        Err(e) => {
            fail(log, fresh.end, "recalibrate", e);
            return Ok(());
        }
    };
    let ood = match learn_widths(&model, &fresh.samples, &config.ood) {
        Ok(o) => o,
        Err(e) => {
            fail(log, fresh.end, "ood-reference", e);
            return Ok(());
        }
    };
    log.emit(
        fresh.end,
        EventKind::Recalibrated {
            version,
            start: fresh.start,
            end: fresh.end,
            alpha: model.result.alpha.as_f64(),
            beta: model.result.beta.as_f64(),
            upper_exceedances: model.result.upper_exceedances,
            lower_exceedances: model.result.lower_exceedances,
        },
    );
    let registered = registry.register(
        model,
        ood,
        Provenance {
            parent: Some(parent),
            trigger: Some(trigger),
            data_fingerprint: data_fingerprint(&[&curated, &fresh.samples]),
            deployed_at: fresh.end,
        },
    )?;
    log.emit(fresh.end, EventKind::Redeployed { version: registered, parent });
    Ok(())
}
