//! Fully connected layers with hand-written reverse mode.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// `y = act(W x + b)` with `W` stored row-major, one row per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn uniform<R: Rng>(inputs: usize, outputs: usize, activation: Activation, scale: f64, rng: &mut R) -> Self {
        let mut layer = Self::zeros(inputs, outputs, activation);
        for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *w = rng.gen_range(-scale..=scale);
        }
        layer
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weights
            .chunks_exact(self.inputs.max(1))
            .take(self.outputs)
            .zip(&self.bias)
            .map(|(row, b)| {
                let z = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
                self.activation.apply(z)
            })
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns dL/dx.
    fn backward(&self, x: &[f64], y: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for o in 0..self.outputs {
            let dz = dy[o] * self.activation.derivative_from_output(y[o]);
            if dz == 0.0 {
                continue;
            }
            grad.bias[o] += dz;
            let row = o * self.inputs;
            for i in 0..self.inputs {
                grad.weights[row + i] += dz * x[i];
                dx[i] += dz * self.weights[row + i];
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations of every layer from one forward pass; `values[0]` is the input.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub values: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("trace has input")
    }
}

impl Mlp {
    /// Layers `widths[0] -> widths[1] -> ... -> widths[n]`, tanh on hidden
    /// layers and `output` on the last one.
    pub fn uniform<R: Rng>(widths: &[usize], output: Activation, scale: f64, rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { Activation::Tanh };
                Dense::uniform(widths[i], widths[i + 1], act, scale, rng)
            })
            .collect();
        Self { layers }
    }

    /// Glorot-uniform weights scaled by `gain`, zero biases.
    pub fn glorot<R: Rng>(widths: &[usize], output: Activation, gain: f64, rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { Activation::Tanh };
                let mut layer = Dense::zeros(widths[i], widths[i + 1], act);
                let bound = gain * (6.0 / (widths[i] + widths[i + 1]) as f64).sqrt();
                for w in &mut layer.weights {
                    *w = rng.gen_range(-bound..=bound);
                }
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    /// Same shapes and activations, all parameters zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs, l.activation))
                .collect(),
        }
    }

    /// Checks that consecutive layers chain and buffers have their declared sizes.
    pub fn check_shapes(&self) -> Result<(), String> {
        if self.layers.is_empty() {
            return Err("MLP has no layers".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(format!("layer {i} buffers do not match {}x{}", l.outputs, l.inputs));
            }
            if let Some(next) = self.layers.get(i + 1) {
                if next.inputs != l.outputs {
                    return Err(format!(
                        "layer {i} outputs {} but layer {} takes {}",
                        l.outputs,
                        i + 1,
                        next.inputs
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.layers.iter().fold(x.to_vec(), |h, l| l.forward(&h))
    }

    pub fn forward_trace(&self, x: &[f64]) -> MlpTrace {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.to_vec());
        for l in &self.layers {
            let next = l.forward(values.last().expect("non-empty"));
            values.push(next);
        }
        MlpTrace { values }
    }

    /// Backpropagates `d_out` through a recorded pass; parameter gradients are
    /// added to `grad`, the input gradient is returned.
    pub fn backward(&self, trace: &MlpTrace, d_out: &[f64], grad: &mut Mlp) -> Vec<f64> {
        let mut delta = d_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            delta = layer.backward(&trace.values[i], &trace.values[i + 1], &delta, &mut grad.layers[i]);
        }
        delta
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameter buffers paired with whether weight decay applies to them.
    pub fn tensors(&self) -> Vec<(&[f64], bool)> {
        self.layers
            .iter()
            .flat_map(|l| [(l.weights.as_slice(), true), (l.bias.as_slice(), false)])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        self.layers
            .iter_mut()
            .flat_map(|l| [(l.weights.as_mut_slice(), true), (l.bias.as_mut_slice(), false)])
            .collect()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
