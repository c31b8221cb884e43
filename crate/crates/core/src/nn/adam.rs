use ndarray::{Array1, Array2, Zip};

use super::{Gradients, Mlp, NnError};

/// Adam moments for every parameter of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    first: Vec<(Array2<f64>, Array1<f64>)>,
    second: Vec<(Array2<f64>, Array1<f64>)>,
}

impl AdamState {
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(mlp: &Mlp, learning_rate: f64, beta1: f64, beta2: f64) -> Result<Self, NnError> {
        if !(learning_rate > 0.0) {
            return Err(NnError::Argument(format!("learning rate {learning_rate} must be > 0")));
        }
        for beta in [beta1, beta2] {
            if !(0.0..1.0).contains(&beta) {
                return Err(NnError::Argument(format!("beta {beta} outside [0, 1)")));
            }
        }
        let zeros = || {
            mlp.layers()
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
                .collect::<Vec<_>>()
        };
        Ok(Self {
            learning_rate,
            beta1,
            beta2,
            epsilon: Self::DEFAULT_EPSILON,
            step_count: 0,
            first: zeros(),
            second: zeros(),
        })
    }

    /// One bias-corrected Adam update of every parameter in `mlp`.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) -> Result<(), NnError> {
        self.check_shapes(mlp, grads)?;
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, &g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (((layer, g), (m_w, m_b)), (v_w, v_b)) in mlp
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            Zip::from(&mut layer.weights)
                .and(m_w)
                .and(v_w)
                .and(&g.weights)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(m_b)
                .and(v_b)
                .and(&g.bias)
                .for_each(update);
        }
        Ok(())
    }

    fn check_shapes(&self, mlp: &Mlp, grads: &Gradients) -> Result<(), NnError> {
        if grads.layers.len() != mlp.layers().len() || self.first.len() != mlp.layers().len() {
            return Err(NnError::Mismatch(format!(
                "{} gradient layers / {} moment layers for a {}-layer network",
                grads.layers.len(),
                self.first.len(),
                mlp.layers().len()
            )));
        }
        for (l, ((layer, g), (m_w, _))) in mlp.layers().iter().zip(&grads.layers).zip(&self.first).enumerate() {
            if g.weights.dim() != layer.weights.dim()
                || g.bias.len() != layer.bias.len()
                || m_w.dim() != layer.weights.dim()
            {
                return Err(NnError::Mismatch(format!("layer {l} gradient/moment shape")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseLayer, LayerGradient};
    use ndarray::{array, Array2};

    fn scalar_net(w: f64) -> Mlp {
        Mlp::new(vec![DenseLayer::new(array![[w]], array![0.0], Activation::Linear).unwrap()]).unwrap()
    }

    fn scalar_grad(gw: f64, gb: f64) -> Gradients {
        Gradients {
            layers: vec![LayerGradient {
                weights: array![[gw]],
                bias: array![gb],
            }],
            input: Array2::zeros((1, 1)),
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut net = scalar_net(0.7);
        let mut adam = AdamState::new(&net, 1e-3, 0.9, 0.999).unwrap();
        adam.step(&mut net, &scalar_grad(0.0, 0.0)).unwrap();
        assert_eq!(net.layers()[0].weights[[0, 0]], 0.7);
        assert_eq!(adam.step_count, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let mut net = scalar_net(0.0);
        let mut adam = AdamState::new(&net, 1e-3, 0.9, 0.999).unwrap();
        adam.step(&mut net, &scalar_grad(1.0, 0.0)).unwrap();
        let delta = net.layers()[0].weights[[0, 0]];
        assert!((delta + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
        assert!((delta + 9.99999e-4).abs() < 1e-9);
    }

    #[test]
    fn zero_betas_give_rms_normalised_sgd() {
        let mut net = scalar_net(1.0);
        let mut adam = AdamState::new(&net, 0.01, 0.0, 0.0).unwrap();
        for g in [0.5, -3.0, 1e-3] {
            let before = net.layers()[0].weights[[0, 0]];
            adam.step(&mut net, &scalar_grad(g, 0.0)).unwrap();
            let delta = net.layers()[0].weights[[0, 0]] - before;
            assert!((delta + 0.01 * g / (g.abs() + 1e-8)).abs() < 1e-15);
        }
    }

    #[test]
    fn five_steps_on_quadratic_match_reference() {
        // f(w) = (w - 3)^2, gradient 2(w - 3); scalar reference loop.
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let (mut w_ref, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        let mut reference = Vec::new();
        for t in 1..=5 {
            let g = 2.0 * (w_ref - 3.0);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            w_ref -= lr * m_hat / (v_hat.sqrt() + eps);
            reference.push(w_ref);
        }

        let mut net = scalar_net(0.0);
        let mut adam = AdamState::new(&net, lr, b1, b2).unwrap();
        for expected in reference {
            let w = net.layers()[0].weights[[0, 0]];
            adam.step(&mut net, &scalar_grad(2.0 * (w - 3.0), 0.0)).unwrap();
            assert!((net.layers()[0].weights[[0, 0]] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_hyperparameters_and_shapes() {
        let net = scalar_net(0.0);
        assert!(AdamState::new(&net, 0.0, 0.9, 0.999).is_err());
        assert!(AdamState::new(&net, 1e-3, 1.0, 0.999).is_err());
        let mut adam = AdamState::new(&net, 1e-3, 0.9, 0.999).unwrap();
        let mut net = net;
        let bad = Gradients {
            layers: vec![LayerGradient {
                weights: array![[1.0, 2.0]],
                bias: array![0.0],
            }],
            input: Array2::zeros((1, 1)),
        };
        assert!(adam.step(&mut net, &bad).is_err());
    }
}
