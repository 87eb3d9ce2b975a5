//! A fully connected network with rectifier hidden layers and manual
//! backpropagation, plus its binary checkpoint format.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::LearnerError;

const CHECKPOINT_MAGIC: &[u8; 4] = b"UGAM";
const CHECKPOINT_VERSION: u8 = 1;

/// Output-layer activation. Hidden layers are always rectifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// 1 / (1 + e^-x): probabilities.
    Logistic,
    /// Pass-through: regression values.
    Identity,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Self::Logistic => 0,
            Self::Identity => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, LearnerError> {
        match tag {
            0 => Ok(Self::Logistic),
            1 => Ok(Self::Identity),
            other => Err(LearnerError::BadCheckpoint(format!(
                "unknown activation tag {other}"
            ))),
        }
    }
}

/// Fully connected network. Layer `l` maps `sizes[l]` inputs to
/// `sizes[l+1]` outputs via `weights[l]` (row-major, one row per output
/// unit) and `biases[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    output_activation: Activation,
}

/// Per-parameter buffers shaped like an [`Mlp`]; used for gradients and
/// optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn clear(&mut self) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|v| *v *= factor);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Cached activations from [`Mlp::forward_cached`], consumed by
/// [`Mlp::backprop`]. `layer_inputs[l]` is the input to layer `l`;
/// `pre_acts[l]` its pre-activation output.
#[derive(Debug, Clone)]
pub struct TapedForward {
    layer_inputs: Vec<Vec<f64>>,
    pre_acts: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Mlp {
    /// Build a model with uniform Xavier initialization in
    /// ±sqrt(6 / (fan_in + fan_out)), drawn from a generator seeded with
    /// `seed`: identical seeds give identical models.
    pub fn new(sizes: &[usize], output_activation: Activation, seed: u64) -> Self {
        assert!(
            sizes.len() >= 2 && sizes.iter().all(|&s| s > 0),
            "layer sizes must be at least [in, out] and positive"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..=bound))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            output_activation,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    /// Total parameter count: Σ (in+1)·out over layers.
    pub fn param_count(&self) -> usize {
        self.sizes
            .windows(2)
            .map(|p| (p[0] + 1) * p[1])
            .sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, LearnerError> {
        Ok(self.forward_cached(input)?.output)
    }

    /// Forward pass that keeps every intermediate needed by
    /// [`Self::backprop`].
    pub fn forward_cached(&self, input: &[f64]) -> Result<TapedForward, LearnerError> {
        if input.len() != self.sizes[0] {
            return Err(LearnerError::DimensionMismatch {
                expected: self.sizes[0],
                got: input.len(),
            });
        }
        let layers = self.weights.len();
        let mut layer_inputs = Vec::with_capacity(layers);
        let mut pre_acts = Vec::with_capacity(layers);
        let mut current = input.to_vec();
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut pre = self.biases[l].clone();
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let mut acc = 0.0;
                for (w, x) in row.iter().zip(&current) {
                    acc += w * x;
                }
                pre[o] += acc;
            }
            let post = if l + 1 == layers {
                match self.output_activation {
                    Activation::Logistic => {
                        pre.iter().map(|&z| 1.0 / (1.0 + (-z).exp())).collect()
                    }
                    Activation::Identity => pre.clone(),
                }
            } else {
                pre.iter().map(|&z| z.max(0.0)).collect()
            };
            layer_inputs.push(std::mem::replace(&mut current, post));
            pre_acts.push(pre);
        }
        Ok(TapedForward {
            layer_inputs,
            pre_acts,
            output: current,
        })
    }

    /// Accumulate into `grads` the gradient of a scalar loss with respect
    /// to every parameter, given the tape of one forward pass and the
    /// loss gradient with respect to the network output.
    pub fn backprop(
        &self,
        tape: &TapedForward,
        output_grad: &[f64],
        grads: &mut Gradients,
    ) -> Result<(), LearnerError> {
        if output_grad.len() != self.output_len() {
            return Err(LearnerError::DimensionMismatch {
                expected: self.output_len(),
                got: output_grad.len(),
            });
        }
        let layers = self.weights.len();
        let mut delta: Vec<f64> = Vec::new();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let pre = &tape.pre_acts[l];
            // d(loss)/d(pre-activation) for this layer.
            let dz: Vec<f64> = if l + 1 == layers {
                match self.output_activation {
                    Activation::Logistic => (0..n_out)
                        .map(|o| {
                            let s = tape.output[o];
                            output_grad[o] * s * (1.0 - s)
                        })
                        .collect(),
                    Activation::Identity => output_grad.to_vec(),
                }
            } else {
                (0..n_out)
                    .map(|o| if pre[o] > 0.0 { delta[o] } else { 0.0 })
                    .collect()
            };
            let input = &tape.layer_inputs[l];
            for o in 0..n_out {
                let g = dz[o];
                if g != 0.0 {
                    let row = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                    for (gw, x) in row.iter_mut().zip(input) {
                        *gw += g * x;
                    }
                }
                grads.biases[l][o] += g;
            }
            if l > 0 {
                let mut prev = vec![0.0; n_in];
                for o in 0..n_out {
                    let g = dz[o];
                    if g != 0.0 {
                        let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += g * w;
                        }
                    }
                }
                delta = prev;
            }
        }
        Ok(())
    }

    /// Apply `update` to every parameter and its gradient/state slots, in
    /// a fixed order (layer, then weights row-major, then biases).
    pub(crate) fn for_each_param(
        &mut self,
        state: &mut [&mut Gradients],
        grads: &Gradients,
        mut update: impl FnMut(&mut f64, f64, &mut [&mut f64]),
    ) {
        for l in 0..self.weights.len() {
            for i in 0..self.weights[l].len() {
                let mut slots: Vec<&mut f64> =
                    state.iter_mut().map(|s| &mut s.weights[l][i]).collect();
                update(&mut self.weights[l][i], grads.weights[l][i], &mut slots);
            }
            for i in 0..self.biases[l].len() {
                let mut slots: Vec<&mut f64> =
                    state.iter_mut().map(|s| &mut s.biases[l][i]).collect();
                update(&mut self.biases[l][i], grads.biases[l][i], &mut slots);
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn params_mut(&mut self) -> Vec<&mut f64> {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flat_map(|v| v.iter_mut())
            .collect()
    }

    /// Serialize to the checkpoint wire format: magic, version, output
    /// activation tag, layer count, layer sizes (u32 little-endian), then
    /// all parameters as f64 little-endian (per layer: weights row-major,
    /// then biases).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.push(CHECKPOINT_VERSION);
        buf.push(self.output_activation.tag());
        buf.push(self.sizes.len() as u8);
        for &s in &self.sizes {
            buf.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for l in 0..self.weights.len() {
            for &w in &self.weights[l] {
                buf.extend_from_slice(&w.to_le_bytes());
            }
            for &b in &self.biases[l] {
                buf.extend_from_slice(&b.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LearnerError> {
        let bad = |msg: &str| LearnerError::BadCheckpoint(msg.to_string());
        if bytes.len() < 7 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("missing UGAM magic"));
        }
        if bytes[4] != CHECKPOINT_VERSION {
            return Err(LearnerError::BadCheckpoint(format!(
                "unsupported version {}",
                bytes[4]
            )));
        }
        let output_activation = Activation::from_tag(bytes[5])?;
        let n_layers = bytes[6] as usize;
        if n_layers < 2 {
            return Err(bad("needs at least two layer sizes"));
        }
        let mut off = 7;
        let mut sizes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let end = off + 4;
            if end > bytes.len() {
                return Err(bad("truncated layer sizes"));
            }
            let s = u32::from_le_bytes(bytes[off..end].try_into().unwrap()) as usize;
            if s == 0 {
                return Err(bad("zero layer size"));
            }
            sizes.push(s);
            off = end;
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let read_f64 = |off: &mut usize| -> Result<f64, LearnerError> {
            let end = *off + 8;
            if end > bytes.len() {
                return Err(bad("truncated parameters"));
            }
            let v = f64::from_le_bytes(bytes[*off..end].try_into().unwrap());
            if !v.is_finite() {
                return Err(bad("non-finite parameter"));
            }
            *off = end;
            Ok(v)
        };
        for pair in sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            let mut w = Vec::with_capacity(n_in * n_out);
            for _ in 0..n_in * n_out {
                w.push(read_f64(&mut off)?);
            }
            let mut b = Vec::with_capacity(n_out);
            for _ in 0..n_out {
                b.push(read_f64(&mut off)?);
            }
            weights.push(w);
            biases.push(b);
        }
        if off != bytes.len() {
            return Err(bad("trailing bytes after parameters"));
        }
        Ok(Self {
            sizes,
            weights,
            biases,
            output_activation,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LearnerError> {
        File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LearnerError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
