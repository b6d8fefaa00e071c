use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{events_fingerprint, events_from_jsonl, events_to_jsonl, run_loop, LoopConfig, LoopEvent, LoopOutcome, LoopSummary, ModelRegistry};
use crate::calibration::CalibrationResult;
use crate::driftsim::DriftScenario;
use crate::error::{Error, Result};
use crate::regressor::Regressor;
use crate::scalar::Scalar;
use crate::seed;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "edgeuq-run";
/// The event that marks a breach-handling cycle as complete.
pub const CYCLE_COMPLETION: &str = "recalibrated";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VersionRecord {
    pub version: usize,
    pub parent: Option<usize>,
    pub trigger: Option<u64>,
    pub deployed_at: u64,
    pub f: String,
    pub u: String,
    pub l: String,
    /// Digest of the calibration record text.
    pub calibration: String,
    pub data: String,
    /// Digest of all of the above plus the OOD rule.
    pub entry: String,
}

/// Everything needed to rerun and verify a loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub format_version: u32,
    pub scalar: String,
    pub cycle_completion: String,
    pub scenario: DriftScenario,
    pub initial_size: usize,
    pub config: LoopConfig,
    /// Digest of scenario, initial size and config.
    pub run_fingerprint: String,
    pub events_fingerprint: String,
    pub registry_fingerprint: String,
    pub versions: Vec<VersionRecord>,
    pub summary: LoopSummary,
}

pub fn run_fingerprint(scenario: &DriftScenario, initial_size: usize, config: &LoopConfig) -> String {
    let doc = serde_json::json!({
        "scenario": scenario,
        "initial_size": initial_size,
        "config": config,
    });
    seed::digest(doc.to_string().as_bytes())
}

impl RunManifest {
    pub(crate) fn build<T: Scalar>(
        scenario: &DriftScenario,
        initial_size: usize,
        config: &LoopConfig,
        registry: &ModelRegistry<T>,
        events: &[LoopEvent],
        summary: LoopSummary,
    ) -> Self {
        RunManifest {
            format: MAGIC.to_owned(),
            format_version: MANIFEST_FORMAT_VERSION,
            scalar: T::NAME.to_owned(),
            cycle_completion: CYCLE_COMPLETION.to_owned(),
            scenario: scenario.clone(),
            initial_size,
            config: config.clone(),
            run_fingerprint: run_fingerprint(scenario, initial_size, config),
            events_fingerprint: events_fingerprint(events),
            registry_fingerprint: registry.fingerprint(),
            versions: registry
                .entries()
                .iter()
                .map(|e| VersionRecord {
                    version: e.version,
                    parent: e.provenance.parent,
                    trigger: e.provenance.trigger,
                    deployed_at: e.provenance.deployed_at,
                    f: e.model.f.fingerprint(),
                    u: e.model.u.fingerprint(),
                    l: e.model.l.fingerprint(),
                    calibration: seed::digest(e.model.result.to_text().as_bytes()),
                    data: e.provenance.data_fingerprint.clone(),
                    entry: e.fingerprint(),
                })
                .collect(),
            summary,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptManifest(e.to_string()))?;
        if value.get("format").and_then(|v| v.as_str()) != Some(MAGIC) {
            return Err(Error::CorruptManifest("not a run manifest".into()));
        }
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptManifest("missing format_version".into()))?;
        if found != u64::from(MANIFEST_FORMAT_VERSION) {
            return Err(Error::ManifestVersion {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                supported: MANIFEST_FORMAT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| Error::CorruptManifest(e.to_string()))
    }
}

/// Reruns the loop recorded in `manifest` and checks that it reproduces the
/// recorded event log and registry exactly.
pub fn replay<T: Scalar>(manifest: &RunManifest) -> Result<LoopOutcome<T>> {
    if manifest.format_version != MANIFEST_FORMAT_VERSION {
        return Err(Error::ManifestVersion {
            found: manifest.format_version,
            supported: MANIFEST_FORMAT_VERSION,
        });
    }
    if manifest.scalar != T::NAME {
        return Err(Error::CorruptManifest(format!(
            "run used scalar {}, replay requested {}",
            manifest.scalar,
            T::NAME
        )));
    }
    let fp = run_fingerprint(&manifest.scenario, manifest.initial_size, &manifest.config);
    if fp != manifest.run_fingerprint {
        return Err(Error::FingerprintMismatch {
            what: "run configuration",
            expected: manifest.run_fingerprint.clone(),
            found: fp,
        });
    }
    let out = run_loop::<T>(&manifest.scenario, manifest.initial_size, &manifest.config)?;
    for (what, expected, found) in [
        ("event log", &manifest.events_fingerprint, &out.manifest.events_fingerprint),
        ("model registry", &manifest.registry_fingerprint, &out.manifest.registry_fingerprint),
    ] {
        if expected != found {
            return Err(Error::FingerprintMismatch {
                what,
                expected: expected.clone(),
                found: found.clone(),
            });
        }
    }
    if out.manifest != *manifest {
        return Err(Error::CorruptManifest(
            "manifest fields disagree with the replayed run".into(),
        ));
    }
    Ok(out)
}

/// Writes `manifest.json`, `events.jsonl` and
/// `registry/v<t>/{f,u,l}.model, calibration.txt, ood.json` under `dir`.
pub fn persist_run<T: Scalar>(dir: impl AsRef<Path>, outcome: &LoopOutcome<T>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("manifest.json"), outcome.manifest.to_json())?;
    fs::write(dir.join("events.jsonl"), events_to_jsonl(&outcome.events))?;
    for e in outcome.registry.entries() {
        let vdir = dir.join("registry").join(format!("v{}", e.version));
        fs::create_dir_all(&vdir)?;
        fs::write(vdir.join("f.model"), e.model.f.save())?;
        fs::write(vdir.join("u.model"), e.model.u.save())?;
        fs::write(vdir.join("l.model"), e.model.l.save())?;
        fs::write(vdir.join("calibration.txt"), e.model.result.to_text())?;
        let mut ood = serde_json::to_string_pretty(&e.ood)?;
        ood.push('\n');
        fs::write(vdir.join("ood.json"), ood)?;
    }
    Ok(())
}

/// Reads a persisted run back and checks every artifact against the manifest.
pub fn load_run<T: Scalar>(dir: impl AsRef<Path>) -> Result<(RunManifest, Vec<LoopEvent>)> {
    let dir = dir.as_ref();
    let manifest = RunManifest::from_json(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let events = events_from_jsonl(&fs::read_to_string(dir.join("events.jsonl"))?)?;
    let found = events_fingerprint(&events);
    if found != manifest.events_fingerprint {
        return Err(Error::FingerprintMismatch {
            what: "event log",
            expected: manifest.events_fingerprint.clone(),
            found,
        });
    }
    for v in &manifest.versions {
        let vdir = dir.join("registry").join(format!("v{}", v.version));
        for (name, expected) in [("f", &v.f), ("u", &v.u), ("l", &v.l)] {
            let model = Regressor::<T>::load(&fs::read(vdir.join(format!("{name}.model")))?)?;
            let found = model.fingerprint();
            if &found != expected {
                return Err(Error::FingerprintMismatch {
                    what: "registry model",
                    expected: expected.clone(),
                    found,
                });
            }
        }
        let text = fs::read_to_string(vdir.join("calibration.txt"))?;
        CalibrationResult::<T>::from_text(&text)?;
        let found = seed::digest(text.as_bytes());
        if found != v.calibration {
            return Err(Error::FingerprintMismatch {
                what: "registry calibration",
                expected: v.calibration.clone(),
                found,
            });
        }
    }
    Ok((manifest, events))
}
