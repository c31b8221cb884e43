use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::{glorot_init_with, Activation, NnError};

/// Fully connected layer computing `act(x W^T + b)` row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `fan_out x fan_in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self, NnError> {
        activation.validate()?;
        if weights.nrows() != bias.len() {
            return Err(NnError::Mismatch(format!(
                "{} weight rows but {} biases",
                weights.nrows(),
                bias.len()
            )));
        }
        if weights.is_empty() {
            return Err(NnError::Argument("layer must have non-zero fan-in and fan-out".into()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Self::new(glorot_init_with(fan_in, fan_out, rng)?, Array1::zeros(fan_out), activation)
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `x W^T + b`, skipping zero inputs when `x` is mostly zero.
    fn affine(&self, input: ArrayView2<f64>) -> Array2<f64> {
        match sparse_rows(input) {
            Some(rows) => {
                let mut pre = Array2::zeros((input.nrows(), self.fan_out()));
                for (mut out, nonzeros) in pre.rows_mut().into_iter().zip(rows) {
                    out.assign(&self.bias);
                    for (j, v) in nonzeros {
                        out.scaled_add(v, &self.weights.column(j));
                    }
                }
                pre
            }
            None => {
                let mut pre = input.dot(&self.weights.t());
                pre += &self.bias;
                pre
            }
        }
    }

    /// `delta^T x`, the summed weight gradient over the batch.
    fn weight_gradient(&self, delta: &Array2<f64>, input: &Array2<f64>) -> Array2<f64> {
        match sparse_rows(input.view()) {
            Some(rows) => {
                let mut grad = Array2::zeros(self.weights.raw_dim());
                for (d, nonzeros) in delta.rows().into_iter().zip(rows) {
                    for (j, v) in nonzeros {
                        grad.column_mut(j).scaled_add(v, &d);
                    }
                }
                grad
            }
            None => delta.t().dot(input),
        }
    }
}

/// Non-zero entries per row, or `None` when more than a quarter of the
/// matrix is non-zero and a dense product is cheaper.
fn sparse_rows(m: ArrayView2<f64>) -> Option<Vec<Vec<(usize, f64)>>> {
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    if nnz * 4 > m.len() {
        return None;
    }
    Some(
        m.rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Everything a forward pass produced: `activations[0]` is the input,
/// `activations[l + 1]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct ActivationTrace {
    pub preactivations: Vec<Array2<f64>>,
    pub activations: Vec<Array2<f64>>,
}

impl ActivationTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("trace holds the input")
    }

    pub fn batch_size(&self) -> usize {
        self.activations[0].nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Batch-mean parameter gradients plus the per-row gradient at the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
    pub input: Array2<f64>,
}

impl Gradients {
    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().all(|v| *v == 0.0) && g.bias.iter().all(|v| *v == 0.0))
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Argument("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(NnError::Shape {
                    layer: i + 1,
                    expected: pair[0].fan_out(),
                    actual: pair[1].fan_in(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Chain of Glorot-initialised layers through `widths`
    /// (input width first). Hidden layers use `hidden`, the last uses `output`.
    pub fn glorot<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if widths.len() < 2 {
            return Err(NnError::Argument("need an input and an output width".into()));
        }
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| DenseLayer::glorot(w[0], w[1], if i == last { output } else { hidden }, rng))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").fan_out()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::parameter_count).sum()
    }

    /// Output only, without keeping intermediate activations.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(input.ncols())?;
        let mut current = input.to_owned();
        for layer in &self.layers {
            let mut pre = layer.affine(current.view());
            let act = layer.activation;
            pre.mapv_inplace(|v| act.apply(v));
            current = pre;
        }
        Ok(current)
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<ActivationTrace, NnError> {
        self.check_input(input.ncols())?;
        let mut preactivations = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for layer in &self.layers {
            let prev = activations.last().expect("input pushed");
            let pre = layer.affine(prev.view());
            let act = layer.activation;
            let out = pre.mapv(|v| act.apply(v));
            preactivations.push(pre);
            activations.push(out);
        }
        Ok(ActivationTrace {
            preactivations,
            activations,
        })
    }

    /// Backpropagates `output_grad`, the per-row gradient of the loss with
    /// respect to the network output.
    pub fn backward(&self, trace: &ActivationTrace, output_grad: ArrayView2<f64>) -> Result<Gradients, NnError> {
        self.check_trace(trace, output_grad.dim())?;
        let last = self.layers.len() - 1;
        let act = self.layers[last].activation;
        let mut delta = output_grad.to_owned();
        Zip::from(&mut delta)
            .and(&trace.preactivations[last])
            .and(&trace.activations[last + 1])
            .for_each(|d, &pre, &out| *d *= act.derivative(pre, out));
        Ok(self.propagate(trace, delta, true))
    }

    /// Like [`Mlp::backward`] but skips the input gradient, leaving
    /// `Gradients::input` empty. Use it for the first network in a chain.
    pub fn backward_params(&self, trace: &ActivationTrace, output_grad: ArrayView2<f64>) -> Result<Gradients, NnError> {
        self.check_trace(trace, output_grad.dim())?;
        let last = self.layers.len() - 1;
        let act = self.layers[last].activation;
        let mut delta = output_grad.to_owned();
        Zip::from(&mut delta)
            .and(&trace.preactivations[last])
            .and(&trace.activations[last + 1])
            .for_each(|d, &pre, &out| *d *= act.derivative(pre, out));
        Ok(self.propagate(trace, delta, false))
    }

    /// Like [`Mlp::backward`] but starting from the gradient with respect to
    /// the last layer's pre-activation, which is exact for sigmoid outputs
    /// paired with cross-entropy even where the sigmoid saturates.
    pub fn backward_from_logits(
        &self,
        trace: &ActivationTrace,
        logit_grad: ArrayView2<f64>,
    ) -> Result<Gradients, NnError> {
        self.check_trace(trace, logit_grad.dim())?;
        Ok(self.propagate(trace, logit_grad.to_owned(), true))
    }

    fn propagate(&self, trace: &ActivationTrace, mut delta: Array2<f64>, input_grad: bool) -> Gradients {
        let batch = trace.batch_size().max(1) as f64;
        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let mut weights = layer.weight_gradient(&delta, &trace.activations[l]);
            weights /= batch;
            let bias = delta.sum_axis(Axis(0)) / batch;
            grads.push(LayerGradient { weights, bias });
            if l == 0 && !input_grad {
                delta = Array2::zeros((0, 0));
                break;
            }
            let mut upstream = delta.dot(&layer.weights);
            if l > 0 {
                let act = self.layers[l - 1].activation;
                Zip::from(&mut upstream)
                    .and(&trace.preactivations[l - 1])
                    .and(&trace.activations[l])
                    .for_each(|d, &pre, &out| *d *= act.derivative(pre, out));
            }
            delta = upstream;
        }
        grads.reverse();
        Gradients {
            layers: grads,
            input: delta,
        }
    }

    fn check_input(&self, width: usize) -> Result<(), NnError> {
        if width != self.input_width() {
            return Err(NnError::Shape {
                layer: 0,
                expected: self.input_width(),
                actual: width,
            });
        }
        Ok(())
    }

    fn check_trace(&self, trace: &ActivationTrace, grad_dim: (usize, usize)) -> Result<(), NnError> {
        if trace.preactivations.len() != self.layers.len()
            || trace.activations.len() != self.layers.len() + 1
        {
            return Err(NnError::Mismatch("trace was not produced by this network".into()));
        }
        for (l, (layer, pre)) in self.layers.iter().zip(&trace.preactivations).enumerate() {
            if pre.ncols() != layer.fan_out() {
                return Err(NnError::Shape {
                    layer: l,
                    expected: layer.fan_out(),
                    actual: pre.ncols(),
                });
            }
        }
        let expected = (trace.batch_size(), self.output_width());
        if grad_dim != expected {
            return Err(NnError::Mismatch(format!(
                "output gradient is {grad_dim:?}, expected {expected:?}"
            )));
        }
        Ok(())
    }
}
