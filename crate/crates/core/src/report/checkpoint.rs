//! Binary model checkpoints.
//!
//! Layout: 8-byte magic, format version (u32 LE), manifest length (u64 LE),
//! manifest JSON, payload length in values (u64 LE), then every parameter as
//! an f64 LE. The payload lists encoder, decoder and discriminator layers in
//! order, each as its row-major weights followed by its bias.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ReportError;
use crate::aae::{AaeModel, ModelProvenance, PriorSpec, LATENT_DIM};
use crate::ledger::EncodingSpec;
use crate::nn::{Activation, DenseLayer, Mlp};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"JEAAECKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerManifest {
    pub fan_in: usize,
    pub fan_out: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub encoder: Vec<LayerManifest>,
    pub decoder: Vec<LayerManifest>,
    pub discriminator: Vec<LayerManifest>,
    pub prior_centers: Vec<[f64; LATENT_DIM]>,
    pub tau: usize,
    pub gamma: f64,
    pub lrelu_slope: f64,
    pub spec_digest: String,
    pub seed: u64,
    /// SHA-256 of the payload bytes, hex encoded.
    pub payload_sha256: String,
}

impl CheckpointManifest {
    pub fn parameter_count(&self) -> usize {
        [&self.encoder, &self.decoder, &self.discriminator]
            .into_iter()
            .flatten()
            .map(|l| l.fan_in * l.fan_out + l.fan_out)
            .sum()
    }
}

fn layer_manifest(mlp: &Mlp) -> Vec<LayerManifest> {
    mlp.layers()
        .iter()
        .map(|l| LayerManifest {
            fan_in: l.fan_in(),
            fan_out: l.fan_out(),
            activation: l.activation,
        })
        .collect()
}

fn payload_bytes(model: &AaeModel) -> Vec<u8> {
    let mut bytes = Vec::new();
    for net in [&model.encoder, &model.decoder, &model.discriminator] {
        for layer in net.layers() {
            for v in layer.weights.iter().chain(layer.bias.iter()) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    bytes
}

pub fn checkpoint_bytes(model: &AaeModel) -> Vec<u8> {
    let payload = payload_bytes(model);
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        encoder: layer_manifest(&model.encoder),
        decoder: layer_manifest(&model.decoder),
        discriminator: layer_manifest(&model.discriminator),
        prior_centers: model.prior.centers().to_vec(),
        tau: model.prior.tau(),
        gamma: model.provenance.gamma,
        lrelu_slope: model.provenance.lrelu_slope,
        spec_digest: model.spec_digest.clone(),
        seed: model.provenance.seed,
        payload_sha256: hex::encode(Sha256::digest(&payload)),
    };
    let manifest = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(32 + manifest.len() + payload.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    out.extend_from_slice(&((payload.len() / 8) as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

pub fn save_checkpoint(model: &AaeModel, path: impl AsRef<Path>) -> Result<(), ReportError> {
    fs::write(path, checkpoint_bytes(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<AaeModel, ReportError> {
    parse_checkpoint(&fs::read(path)?)
}

/// Loads a checkpoint and checks it was trained against `spec`.
pub fn load_checkpoint_for(path: impl AsRef<Path>, spec: &EncodingSpec) -> Result<AaeModel, ReportError> {
    let model = load_checkpoint(path)?;
    let actual = spec.digest();
    if model.spec_digest != actual {
        return Err(ReportError::DigestMismatch {
            expected: model.spec_digest,
            actual,
        });
    }
    Ok(model)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ReportError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(ReportError::Truncated {
            expected: self.at.saturating_add(n),
            actual: self.bytes.len(),
        })?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, ReportError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<AaeModel, ReportError> {
    let mut cur = Cursor { bytes, at: 0 };
    if cur.take(8)? != CHECKPOINT_MAGIC {
        return Err(ReportError::Format("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(ReportError::Version {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let manifest_len = usize::try_from(cur.u64()?).map_err(|_| ReportError::Format("manifest length".into()))?;
    let manifest: CheckpointManifest = serde_json::from_slice(cur.take(manifest_len)?)
        .map_err(|e| ReportError::Format(format!("manifest: {e}")))?;
    if manifest.format_version != version {
        return Err(ReportError::Version {
            found: manifest.format_version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let declared = cur.u64()?;
    let remaining = (bytes.len() - cur.at) as u64;
    let expected = manifest.parameter_count() as u64;
    if declared != expected || remaining != expected.saturating_mul(8) {
        return Err(ReportError::Truncated {
            expected: (cur.at as u64).saturating_add(declared.saturating_mul(8)) as usize,
            actual: bytes.len(),
        });
    }
    let payload = &bytes[cur.at..];
    if hex::encode(Sha256::digest(payload)) != manifest.payload_sha256 {
        return Err(ReportError::Checksum);
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut build = |layers: &[LayerManifest]| -> Result<Mlp, ReportError> {
        let built = layers
            .iter()
            .map(|l| {
                let w: Vec<f64> = values.by_ref().take(l.fan_in * l.fan_out).collect();
                let b: Array1<f64> = values.by_ref().take(l.fan_out).collect();
                let w = Array2::from_shape_vec((l.fan_out, l.fan_in), w)
                    .map_err(|e| ReportError::Format(e.to_string()))?;
                DenseLayer::new(w, b, l.activation).map_err(|e| ReportError::Format(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Mlp::new(built).map_err(|e| ReportError::Format(e.to_string()))
    };
    let encoder = build(&manifest.encoder)?;
    let decoder = build(&manifest.decoder)?;
    let discriminator = build(&manifest.discriminator)?;
    let prior = PriorSpec::new(manifest.prior_centers).map_err(|e| ReportError::Format(e.to_string()))?;
    if prior.tau() != manifest.tau {
        return Err(ReportError::Format(format!(
            "tau {} but {} prior centers",
            manifest.tau,
            prior.tau()
        )));
    }
    let provenance = ModelProvenance {
        gamma: manifest.gamma,
        lrelu_slope: manifest.lrelu_slope,
        seed: manifest.seed,
    };
    AaeModel::from_parts(encoder, decoder, discriminator, prior, manifest.spec_digest, provenance)
        .map_err(|e| ReportError::Format(e.to_string()))
}
