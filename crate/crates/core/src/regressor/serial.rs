//! Versioned JSON envelope for models. Parameters are stored as hex bit
//! patterns so a load reproduces predictions bit for bit.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Regressor, RegressorSpec, TrainingHistory};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "edgeuq-model";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    format: String,
    format_version: u32,
    scalar: String,
    spec: RegressorSpec,
    input_dim: usize,
    history: TrainingHistoryRepr,
    params: Vec<String>,
    checksum: String,
}

// NaN (untrained) is not representable in JSON, so the loss travels as bits.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainingHistoryRepr {
    final_loss_bits: String,
    epochs_run: usize,
}

#[derive(Deserialize)]
struct VersionProbe {
    format: Option<String>,
    format_version: Option<u32>,
}

impl<T: Scalar> Regressor<T> {
    /// SHA-256 over the canonical serialization of spec, dimension and parameters.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(T::NAME.as_bytes());
        h.update(serde_json::to_vec(&self.spec).expect("spec serializes"));
        h.update((self.dim as u64).to_le_bytes());
        for p in &self.params {
            h.update(p.to_bits_u64().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn save(&self) -> Vec<u8> {
        let env = Envelope {
            format: MAGIC.into(),
            format_version: MODEL_FORMAT_VERSION,
            scalar: T::NAME.into(),
            spec: self.spec.clone(),
            input_dim: self.dim,
            history: TrainingHistoryRepr {
                final_loss_bits: format!("{:016x}", self.history.final_loss.to_bits()),
                epochs_run: self.history.epochs_run,
            },
            params: self
                .params
                .iter()
                .map(|p| format!("{:016x}", p.to_bits_u64()))
                .collect(),
            checksum: self.fingerprint(),
        };
        let mut out = serde_json::to_vec_pretty(&env).expect("envelope serializes");
        out.push(b'\n');
        out
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: String| Error::CorruptModel(m);
        let probe: VersionProbe =
            serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
        if probe.format.as_deref() != Some(MAGIC) {
            return Err(corrupt("missing format tag".into()));
        }
        match probe.format_version {
            Some(MODEL_FORMAT_VERSION) => {}
            Some(found) => {
                return Err(Error::ModelVersion {
                    found,
                    supported: MODEL_FORMAT_VERSION,
                })
            }
            None => return Err(corrupt("missing format_version".into())),
        }
        let env: Envelope = serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
        if env.scalar != T::NAME {
            return Err(corrupt(format!(
                "scalar type {} does not match {}",
                env.scalar,
                T::NAME
            )));
        }
        let parse_bits =
            |s: &str| u64::from_str_radix(s, 16).map_err(|e| corrupt(format!("{s:?}: {e}")));
        let params = env
            .params
            .iter()
            .map(|s| parse_bits(s).map(T::from_bits_u64))
            .collect::<Result<Vec<T>>>()?;
        let mut model = Regressor::from_parameters(env.spec, env.input_dim, params)
            .map_err(|e| corrupt(e.to_string()))?;
        model.history = TrainingHistory {
            final_loss: f64::from_bits(parse_bits(&env.history.final_loss_bits)?),
            epochs_run: env.history.epochs_run,
        };
        if model.fingerprint() != env.checksum {
            return Err(corrupt("checksum mismatch".into()));
        }
        Ok(model)
    }
}
