use std::ops::Range;

use super::NnError;

/// Predictions are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` inside logs.
pub const PROB_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Gradient with respect to the prediction, same length as it.
    pub grad: Vec<f64>,
}

/// `(1/k) * sum (x - x_hat)^2`
pub fn mse_loss(target: &[f64], predicted: &[f64]) -> Result<LossValue, NnError> {
    if target.len() != predicted.len() || target.is_empty() {
        return Err(NnError::Mismatch(format!(
            "mse over {} targets and {} predictions",
            target.len(),
            predicted.len()
        )));
    }
    let k = target.len() as f64;
    let mut value = 0.0;
    let grad = target
        .iter()
        .zip(predicted)
        .map(|(x, p)| {
            let d = p - x;
            value += d * d;
            2.0 * d / k
        })
        .collect();
    Ok(LossValue { value: value / k, grad })
}

/// Binary cross-entropy averaged over the dimensions covered by `blocks`.
/// Each block of `target` must be one-hot; columns outside the blocks get
/// zero gradient.
pub fn cross_entropy_loss(
    target: &[f64],
    predicted: &[f64],
    blocks: &[Range<usize>],
) -> Result<LossValue, NnError> {
    if target.len() != predicted.len() {
        return Err(NnError::Mismatch(format!(
            "cross-entropy over {} targets and {} predictions",
            target.len(),
            predicted.len()
        )));
    }
    let dims: usize = blocks.iter().map(|b| b.len()).sum();
    if dims == 0 {
        return Err(NnError::Argument("no categorical dimensions".into()));
    }
    let n = dims as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; predicted.len()];
    for (b, block) in blocks.iter().enumerate() {
        if block.end > target.len() || !is_one_hot(&target[block.clone()]) {
            return Err(NnError::InvalidTarget { block: b });
        }
        for j in block.clone() {
            let t = target[j];
            let p = predicted[j].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            value -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
            grad[j] = (-t / p + (1.0 - t) / (1.0 - p)) / n;
        }
    }
    Ok(LossValue { value: value / n, grad })
}

fn is_one_hot(block: &[f64]) -> bool {
    let mut ones = 0;
    for &v in block {
        if v == 1.0 {
            ones += 1;
        } else if v != 0.0 {
            return false;
        }
    }
    ones == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mse_basics() {
        assert_eq!(mse_loss(&[0.3, 0.9], &[0.3, 0.9]).unwrap().value, 0.0);
        let l = mse_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l.value, 0.5);
        assert_eq!(l.grad, vec![-1.0, 0.0]);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn mse_matches_compensated_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let k = rng.random_range(1..200);
            let x: Vec<f64> = (0..k).map(|_| rng.random()).collect();
            let y: Vec<f64> = (0..k).map(|_| rng.random()).collect();
            // Kahan-summed oracle.
            let (mut sum, mut c) = (0.0f64, 0.0f64);
            for (a, b) in x.iter().zip(&y) {
                let term = (a - b) * (a - b) - c;
                let t = sum + term;
                c = (t - sum) - term;
                sum = t;
            }
            let oracle = sum / k as f64;
            assert!((mse_loss(&x, &y).unwrap().value - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let l = cross_entropy_loss(&[1.0, 0.0], &[0.5, 0.5], &[0..2]).unwrap();
        assert!((l.value - std::f64::consts::LN_2).abs() < 1e-15);
        let perfect = cross_entropy_loss(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0], &[0..3]).unwrap();
        assert!(perfect.value < 1e-11);
    }

    #[test]
    fn cross_entropy_rejects_non_one_hot() {
        assert_eq!(
            cross_entropy_loss(&[1.0, 1.0, 0.0, 1.0], &[0.5; 4], &[0..2, 2..4]).unwrap_err(),
            NnError::InvalidTarget { block: 0 }
        );
        assert_eq!(
            cross_entropy_loss(&[1.0, 0.0, 0.5, 0.5], &[0.5; 4], &[0..2, 2..4]).unwrap_err(),
            NnError::InvalidTarget { block: 1 }
        );
    }

    #[test]
    fn cross_entropy_ignores_columns_outside_blocks() {
        let l = cross_entropy_loss(&[0.0, 1.0, 0.7], &[0.2, 0.6, 0.1], &[0..2]).unwrap();
        assert_eq!(l.grad[2], 0.0);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let blocks = [0..3, 3..5, 5..9];
        for _ in 0..20 {
            let mut target = vec![0.0; 10];
            for block in &blocks {
                target[rng.random_range(block.clone())] = 1.0;
            }
            let p: Vec<f64> = (0..10).map(|_| rng.random_range(0.05..0.95)).collect();
            let analytic = cross_entropy_loss(&target, &p, &blocks).unwrap().grad;
            let h = 1e-6;
            for j in 0..10 {
                let mut up = p.clone();
                let mut down = p.clone();
                up[j] += h;
                down[j] -= h;
                let fd = (cross_entropy_loss(&target, &up, &blocks).unwrap().value
                    - cross_entropy_loss(&target, &down, &blocks).unwrap().value)
                    / (2.0 * h);
                let denom = fd.abs().max(analytic[j].abs()).max(1e-12);
                assert!((fd - analytic[j]).abs() / denom < 1e-4 || (fd - analytic[j]).abs() < 1e-10);
            }
        }
    }
}
