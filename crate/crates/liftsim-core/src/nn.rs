//! Minimal dense feedforward network: forward pass, exact reverse-mode
//! gradients, plain SGD, and a JSON checkpoint format that round-trips
//! weights bit for bit.
//!
//! Everything is `f64` and hand-rolled over flat `Vec`s; the architectures
//! here are a few thousand parameters, not a GPU workload.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("input length {got} does not match first-layer width {expected}")]
    InputMismatch { expected: usize, got: usize },
    #[error("upstream gradient length {got} does not match output width {expected}")]
    UpstreamMismatch { expected: usize, got: usize },
    #[error("layer {layer} expects input width {expected} but the previous layer produces {got}")]
    ChainViolation {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("the final layer must use the identity activation")]
    FinalActivation,
    #[error("non-finite parameter in layer {layer} at index {index}")]
    NonFiniteParam { layer: usize, index: usize },
    #[error("non-finite gradient in layer {layer} at index {index}")]
    NonFiniteGradient { layer: usize, index: usize },
    #[error("network must have at least one layer")]
    Empty,
    #[error("checkpoint parse error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "relu")]
    Relu,
    #[serde(rename = "id")]
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Dense layer: `out_dim x in_dim` row-major weights plus a bias per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    d_weights: vec![0.0; l.weights.len()],
                    d_bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    /// `self += other * scale`, used to average minibatch gradients.
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            for (m, t) in mine.d_weights.iter_mut().zip(&theirs.d_weights) {
                *m += t * scale;
            }
            for (m, t) in mine.d_bias.iter_mut().zip(&theirs.d_bias) {
                *m += t * scale;
            }
        }
    }
}

impl Network {
    /// Validate the dimension chain, the identity output, and finiteness.
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Empty);
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].in_dim != pair[0].out_dim {
                return Err(NnError::ChainViolation {
                    layer: i + 1,
                    expected: pair[1].in_dim,
                    got: pair[0].out_dim,
                });
            }
        }
        if layers.last().unwrap().activation != Activation::Identity {
            return Err(NnError::FinalActivation);
        }
        for (li, layer) in layers.iter().enumerate() {
            for (pi, p) in layer.weights.iter().chain(&layer.bias).enumerate() {
                if !p.is_finite() {
                    return Err(NnError::NonFiniteParam {
                        layer: li,
                        index: pi,
                    });
                }
            }
        }
        Ok(Self { layers })
    }

    /// Uniform `+-sqrt(6 / (in + out))` init, ReLU hidden layers, identity
    /// output. `dims` lists every layer width, input first.
    pub fn glorot(dims: &[usize], seed: u64) -> Result<Self, NnError> {
        if dims.len() < 2 {
            return Err(NnError::Empty);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
            let activation = if i + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            let mut layer = Layer::zeros(in_dim, out_dim, activation);
            for w in layer.weights.iter_mut() {
                *w = rng.gen_range(-limit..=limit);
            }
            layers.push(layer);
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn affine(layer: &Layer, input: &[f64], pre: &mut Vec<f64>) {
        pre.clear();
        for o in 0..layer.out_dim {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut z = layer.bias[o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            pre.push(z);
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::InputMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut current = input.to_vec();
        let mut pre = Vec::new();
        for layer in &self.layers {
            Self::affine(layer, &current, &mut pre);
            current.clear();
            current.extend(pre.iter().map(|&z| layer.activation.apply(z)));
        }
        Ok(current)
    }

    /// Exact gradients of `<upstream, forward(input)>` with respect to every
    /// parameter.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Gradients, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::InputMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        if upstream.len() != self.output_dim() {
            return Err(NnError::UpstreamMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        // Forward pass keeping each layer's input and pre-activation.
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            let mut pre = Vec::new();
            Self::affine(layer, &current, &mut pre);
            inputs.push(current);
            current = pre.iter().map(|&z| layer.activation.apply(z)).collect();
            pres.push(pre);
        }
        // Backward pass: delta is d(loss)/d(pre-activation).
        let mut grads = Gradients::zeros_like(self);
        let mut delta: Vec<f64> = upstream.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            for (d, &z) in delta.iter_mut().zip(&pres[li]) {
                *d *= layer.activation.derivative(z);
            }
            let grad = &mut grads.layers[li];
            let layer_input = &inputs[li];
            for o in 0..layer.out_dim {
                grad.d_bias[o] = delta[o];
                let row = &mut grad.d_weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, &x) in row.iter_mut().zip(layer_input) {
                    *g = delta[o] * x;
                }
            }
            if li > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += delta[o] * w;
                    }
                }
                delta = prev;
            }
        }
        Ok(grads)
    }

    /// Plain gradient-descent step: `p -= lr * g` on every parameter.
    /// Non-finite gradients are rejected with their location.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<(), NnError> {
        assert!(lr.is_finite() && lr >= 0.0, "learning rate must be finite and nonnegative");
        for (li, grad) in grads.layers.iter().enumerate() {
            for (pi, g) in grad.d_weights.iter().chain(&grad.d_bias).enumerate() {
                if !g.is_finite() {
                    return Err(NnError::NonFiniteGradient {
                        layer: li,
                        index: pi,
                    });
                }
            }
        }
        for (layer, grad) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, g) in layer.weights.iter_mut().zip(&grad.d_weights) {
                *w -= lr * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(&grad.d_bias) {
                *b -= lr * g;
            }
        }
        Ok(())
    }
}

// --- checkpoint format ---------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerRecord {
    #[serde(rename = "in")]
    pub in_dim: usize,
    #[serde(rename = "out")]
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub created: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderMeta {
    pub floor_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layers: Vec<LayerRecord>,
    pub meta: CheckpointMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<EncoderMeta>,
}

impl Checkpoint {
    pub fn from_network(net: &Network, meta: CheckpointMeta, encoder: Option<EncoderMeta>) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    w: l.weights.clone(),
                    b: l.bias.clone(),
                    act: l.activation,
                })
                .collect(),
            meta,
            encoder,
        }
    }

    pub fn to_network(&self) -> Result<Network, NnError> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, rec) in self.layers.iter().enumerate() {
            if rec.w.len() != rec.in_dim * rec.out_dim || rec.b.len() != rec.out_dim {
                return Err(NnError::Checkpoint(format!(
                    "layer {i}: {}x{} declared but {} weights and {} biases stored",
                    rec.out_dim,
                    rec.in_dim,
                    rec.w.len(),
                    rec.b.len()
                )));
            }
            layers.push(Layer {
                in_dim: rec.in_dim,
                out_dim: rec.out_dim,
                weights: rec.w.clone(),
                bias: rec.b.clone(),
                activation: rec.act,
            });
        }
        Network::new(layers)
    }
}

/// Serialize to the checkpoint JSON schema.
pub fn save_checkpoint<W: Write>(checkpoint: &Checkpoint, mut sink: W) -> Result<(), NnError> {
    let json = serde_json::to_string(checkpoint)
        .map_err(|e| NnError::Checkpoint(format!("serialize: {e}")))?;
    sink.write_all(json.as_bytes())?;
    sink.write_all(b"\n")?;
    Ok(())
}

/// Parse a checkpoint; a malformed or truncated file yields an error and no
/// partial network.
pub fn load_checkpoint<R: Read>(mut source: R) -> Result<Checkpoint, NnError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    serde_json::from_str(&text).map_err(|e| NnError::Checkpoint(e.to_string()))
}
