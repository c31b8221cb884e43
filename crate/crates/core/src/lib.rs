//! Adversarial-autoencoder anomaly scoring for accounting journal entries.
//!
//! The pipeline is: load or generate a ledger ([`ledger`]), one-hot encode
//! it, train an adversarial autoencoder whose latent space is pushed onto a
//! ring of Gaussian modes ([`aae`]), then score every entry by blending its
//! per-mode normalised reconstruction error with its distance to the
//! closest mode ([`scoring`]). [`report`] holds persistence and evaluation.

pub mod aae;
pub mod ledger;
pub mod nn;
pub mod report;
pub mod scoring;
