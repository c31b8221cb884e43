use serde::{Deserialize, Serialize};

/// Sigmoid layer outputs are kept inside `[SIGMOID_CLAMP, 1 - SIGMOID_CLAMP]`
/// so they stay strictly within (0, 1) once the exact value rounds to 0 or 1.
pub const SIGMOID_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Sigmoid,
    Linear,
}

pub fn lrelu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => lrelu(x, slope),
            Activation::Sigmoid => sigmoid(x).clamp(SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP),
            Activation::Linear => x,
        }
    }

    /// Derivative given the pre-activation and the activation output.
    pub fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if pre >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Linear => 1.0,
        }
    }

    pub(crate) fn validate(self) -> Result<(), super::NnError> {
        match self {
            Activation::LeakyRelu { slope } if !(slope > 0.0 && slope < 1.0) => Err(
                super::NnError::Argument(format!("leaky relu slope {slope} outside (0, 1)")),
            ),
            _ => Ok(()),
        }
    }
}
