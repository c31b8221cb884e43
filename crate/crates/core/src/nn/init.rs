use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NnError;

/// Glorot/Xavier uniform weights (`fan_out x fan_in`), bound sqrt(6 / (fan_in + fan_out)).
pub fn glorot_init(fan_in: usize, fan_out: usize, seed: u64) -> Result<Array2<f64>, NnError> {
    glorot_init_with(fan_in, fan_out, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn glorot_init_with<R: Rng + ?Sized>(
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Result<Array2<f64>, NnError> {
    if fan_in == 0 || fan_out == 0 {
        return Err(NnError::Argument(format!(
            "glorot init needs positive fan-in/out, got {fan_in}/{fan_out}"
        )));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Ok(Array2::from_shape_simple_fn((fan_out, fan_in), || {
        rng.random_range(-limit..=limit)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_and_deterministic() {
        let w = glorot_init(30, 7, 42).unwrap();
        assert_eq!(w.dim(), (7, 30));
        let limit = (6.0f64 / 37.0).sqrt();
        assert!(w.iter().all(|v| v.abs() <= limit));
        assert_eq!(w, glorot_init(30, 7, 42).unwrap());
        assert_ne!(w, glorot_init(30, 7, 43).unwrap());
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(glorot_init(0, 3, 1).is_err());
        assert!(glorot_init(3, 0, 1).is_err());
    }

    #[test]
    fn large_matrix_mean_is_near_zero() {
        let w = glorot_init(1000, 1000, 7).unwrap();
        let n = w.len() as f64;
        // Uniform(-L, L) has std L / sqrt(3).
        let limit = (6.0f64 / 2000.0).sqrt();
        let std = limit / 3f64.sqrt();
        let mean = w.sum() / n;
        assert!(mean.abs() <= 3.0 * std / n.sqrt(), "mean {mean}");
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var.sqrt() / std - 1.0).abs() < 0.01);
    }
}
