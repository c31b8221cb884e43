//! Adversarial autoencoder: encoder, decoder and latent discriminator,
//! a Gaussian-mixture prior over the two-dimensional code space, and the
//! two-phase training loop.

mod model;
mod prior;
mod train;

pub use model::{decode, encode, AaeModel, Architecture, ArchitectureProfile, ModelProvenance};
pub use prior::{default_mode_centers, sample_prior, sample_prior_components, sample_prior_with, PriorSpec, DEFAULT_RING_RADIUS};
pub use train::{
    discriminator_step, generator_step, reconstruction_objective, reconstruction_step, regularization_step, train, train_observed, EpochRecord,
    GeneratorLoss, Optimizers, TrainConfig, TrainTrace,
};

use thiserror::Error;

use crate::nn::NnError;

/// Width of the latent code.
pub const LATENT_DIM: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum AaeError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot train on an empty matrix")]
    EmptyInput,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("non-finite {quantity} at epoch {epoch}, step {step}")]
    Training {
        epoch: usize,
        step: usize,
        quantity: &'static str,
    },
}
