use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibratedModel;
use crate::error::{Error, Result};
use crate::metrics::OodRule;
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// `None` only for the initial deployment.
    pub parent: Option<usize>,
    /// `seq` of the breach event that started the cycle.
    pub trigger: Option<u64>,
    /// Digest of the data the version was trained and calibrated on.
    pub data_fingerprint: String,
    /// Stream position at which the version went live.
    pub deployed_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry<T> {
    pub version: usize,
    pub model: CalibratedModel<T>,
    pub ood: OodRule,
    pub provenance: Provenance,
}

impl<T: Scalar> RegistryEntry<T> {
    /// Digest over every artifact of the version.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        writeln!(s, "version={}", self.version).unwrap();
        writeln!(s, "f={}", self.model.f.fingerprint()).unwrap();
        writeln!(s, "u={}", self.model.u.fingerprint()).unwrap();
        writeln!(s, "l={}", self.model.l.fingerprint()).unwrap();
        s.push_str(&self.model.result.to_text());
        s.push_str(&serde_json::to_string(&self.ood).expect("ood rule serializes"));
        s.push_str(&serde_json::to_string(&self.provenance).expect("provenance serializes"));
        seed::digest(s.as_bytes())
    }
}

/// Deployed versions `f_t` with their bounds and calibration, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRegistry<T> {
    entries: Vec<RegistryEntry<T>>,
}

impl<T: Scalar> ModelRegistry<T> {
    pub fn new(initial: CalibratedModel<T>, ood: OodRule, provenance: Provenance) -> Result<Self> {
        if provenance.parent.is_some() || provenance.trigger.is_some() {
            return Err(Error::InvalidArgument(
                "version 0 has no parent or trigger".into(),
            ));
        }
        Ok(ModelRegistry {
            entries: vec![RegistryEntry {
                version: 0,
                model: initial,
                ood,
                provenance,
            }],
        })
    }

    /// Appends version `latest + 1`; the parent must be an existing version
    /// and a trigger is required.
    pub fn register(&mut self, model: CalibratedModel<T>, ood: OodRule, provenance: Provenance) -> Result<usize> {
        let version = self.entries.len();
        match (provenance.parent, provenance.trigger) {
            (Some(p), Some(_)) if p < version => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "version {version} needs an existing parent and a trigger"
                )))
            }
        }
        self.entries.push(RegistryEntry {
            version,
            model,
            ood,
            provenance,
        });
        Ok(version)
    }

    pub fn latest(&self) -> &RegistryEntry<T> {
        self.entries.last().expect("registry is never empty")
    }

    pub fn get(&self, version: usize) -> Option<&RegistryEntry<T>> {
        self.entries.get(version)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entries(&self) -> &[RegistryEntry<T>] {
        &self.entries
    }

    pub fn fingerprint(&self) -> String {
        let joined: Vec<String> = self.entries.iter().map(RegistryEntry::fingerprint).collect();
        seed::digest(joined.join("\n").as_bytes())
    }
}
