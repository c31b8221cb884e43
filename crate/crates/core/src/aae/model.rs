use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AaeError, PriorSpec, LATENT_DIM};
use crate::nn::{Activation, Mlp, NnError};

/// The two published layer-width profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchitectureProfile {
    A,
    B,
}

impl ArchitectureProfile {
    pub fn architecture(self) -> Architecture {
        match self {
            ArchitectureProfile::A => Architecture {
                encoder_hidden: vec![256, 128, 64, 32, 16, 8, 4],
                decoder_hidden: vec![4, 8, 16, 32, 64, 128, 256],
                discriminator_hidden: vec![128, 64, 32, 16],
            },
            ArchitectureProfile::B => Architecture {
                encoder_hidden: vec![256, 64, 16, 4],
                decoder_hidden: vec![4, 16, 64, 256],
                discriminator_hidden: vec![256, 64, 16, 4],
            },
        }
    }
}

impl fmt::Display for ArchitectureProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArchitectureProfile::A => "A",
            ArchitectureProfile::B => "B",
        })
    }
}

impl FromStr for ArchitectureProfile {
    type Err = AaeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(ArchitectureProfile::A),
            "B" | "b" => Ok(ArchitectureProfile::B),
            other => Err(AaeError::Config(format!("unknown architecture profile {other:?}"))),
        }
    }
}

/// Hidden-layer widths of the three networks. The fixed ends (input width
/// k, latent width 2, discriminator output 1) are added when building.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
}

impl Architecture {
    pub fn encoder_widths(&self, k: usize) -> Vec<usize> {
        chain(k, &self.encoder_hidden, LATENT_DIM)
    }

    pub fn decoder_widths(&self, k: usize) -> Vec<usize> {
        chain(LATENT_DIM, &self.decoder_hidden, k)
    }

    pub fn discriminator_widths(&self) -> Vec<usize> {
        chain(LATENT_DIM, &self.discriminator_hidden, 1)
    }
}

fn chain(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut widths = Vec::with_capacity(hidden.len() + 2);
    widths.push(input);
    widths.extend_from_slice(hidden);
    widths.push(output);
    widths
}

/// Settings a trained model was produced with; stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub gamma: f64,
    pub lrelu_slope: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaeModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub discriminator: Mlp,
    pub prior: PriorSpec,
    /// Digest of the encoding spec the model was trained against.
    pub spec_digest: String,
    pub provenance: ModelProvenance,
}

impl AaeModel {
    pub fn from_parts(
        encoder: Mlp,
        decoder: Mlp,
        discriminator: Mlp,
        prior: PriorSpec,
        spec_digest: String,
        provenance: ModelProvenance,
    ) -> Result<Self, AaeError> {
        let wiring = [
            ("encoder output", encoder.output_width(), LATENT_DIM),
            ("decoder input", decoder.input_width(), LATENT_DIM),
            ("decoder output", decoder.output_width(), encoder.input_width()),
            ("discriminator input", discriminator.input_width(), LATENT_DIM),
            ("discriminator output", discriminator.output_width(), 1),
        ];
        for (what, actual, expected) in wiring {
            if actual != expected {
                return Err(AaeError::Config(format!("{what} width {actual}, expected {expected}")));
            }
        }
        Ok(Self {
            encoder,
            decoder,
            discriminator,
            prior,
            spec_digest,
            provenance,
        })
    }

    /// Fresh Glorot-initialised networks for `k` input dimensions.
    /// Hidden layers use leaky ReLU; the encoder bottleneck is linear and the
    /// decoder and discriminator end in a sigmoid.
    pub fn initialize<R: Rng + ?Sized>(
        k: usize,
        architecture: &Architecture,
        prior: PriorSpec,
        spec_digest: String,
        provenance: ModelProvenance,
        rng: &mut R,
    ) -> Result<Self, AaeError> {
        if k == 0 {
            return Err(AaeError::Config("input width must be positive".into()));
        }
        let hidden = Activation::LeakyRelu {
            slope: provenance.lrelu_slope,
        };
        let encoder = Mlp::glorot(&architecture.encoder_widths(k), hidden, Activation::Linear, rng)?;
        let decoder = Mlp::glorot(&architecture.decoder_widths(k), hidden, Activation::Sigmoid, rng)?;
        let discriminator = Mlp::glorot(&architecture.discriminator_widths(), hidden, Activation::Sigmoid, rng)?;
        Self::from_parts(encoder, decoder, discriminator, prior, spec_digest, provenance)
    }

    pub fn input_dims(&self) -> usize {
        self.encoder.input_width()
    }
}

/// Latent codes for every row of `x`.
pub fn encode(model: &AaeModel, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
    model.encoder.predict(x)
}

/// Reconstructions in (0, 1) for every latent row of `z`.
pub fn decode(model: &AaeModel, z: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
    model.decoder.predict(z)
}
