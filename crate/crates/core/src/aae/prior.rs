use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AaeError, LATENT_DIM};

pub const DEFAULT_RING_RADIUS: f64 = 8.0;

/// Mixture of unit-covariance Gaussians in the latent plane, equal weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    centers: Vec<[f64; LATENT_DIM]>,
}

impl PriorSpec {
    pub fn new(centers: Vec<[f64; LATENT_DIM]>) -> Result<Self, AaeError> {
        if centers.is_empty() {
            return Err(AaeError::Config("prior needs at least one mode".into()));
        }
        if centers.iter().flatten().any(|c| !c.is_finite()) {
            return Err(AaeError::Config("mode centers must be finite".into()));
        }
        for (i, a) in centers.iter().enumerate() {
            if centers[i + 1..].contains(a) {
                return Err(AaeError::Config(format!("mode center {a:?} appears twice")));
            }
        }
        Ok(Self { centers })
    }

    /// `tau` modes evenly spaced on a circle of `radius` around the origin.
    pub fn ring(tau: usize, radius: f64) -> Result<Self, AaeError> {
        if tau == 0 {
            return Err(AaeError::Config("tau must be at least 1".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(AaeError::Config(format!("ring radius {radius} must be positive")));
        }
        Self::new(default_mode_centers(tau, radius))
    }

    pub fn tau(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[[f64; LATENT_DIM]] {
        &self.centers
    }
}

/// Ring layout of mode centers; a single mode sits at the origin.
pub fn default_mode_centers(tau: usize, radius: f64) -> Vec<[f64; LATENT_DIM]> {
    if tau == 1 {
        return vec![[0.0, 0.0]];
    }
    (0..tau)
        .map(|i| {
            let angle = 2.0 * PI * i as f64 / tau as f64;
            [radius * angle.cos(), radius * angle.sin()]
        })
        .collect()
}

pub fn sample_prior(prior: &PriorSpec, count: usize, seed: u64) -> Array2<f64> {
    sample_prior_with(prior, count, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Uniform mode choice plus standard-normal noise per dimension.
pub fn sample_prior_with<R: Rng + ?Sized>(prior: &PriorSpec, count: usize, rng: &mut R) -> Array2<f64> {
    sample_prior_components(prior, count, rng).0
}

/// Like [`sample_prior_with`], also returning the 0-based mode each row was
/// drawn from.
pub fn sample_prior_components<R: Rng + ?Sized>(
    prior: &PriorSpec,
    count: usize,
    rng: &mut R,
) -> (Array2<f64>, Vec<usize>) {
    let mut out = Array2::zeros((count, LATENT_DIM));
    let mut modes = Vec::with_capacity(count);
    for mut row in out.rows_mut() {
        let mode = rng.random_range(0..prior.tau());
        for (d, c) in prior.centers[mode].iter().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            row[d] = c + noise;
        }
        modes.push(mode);
    }
    (out, modes)
}
