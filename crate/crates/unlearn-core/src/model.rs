//! A small dense feed-forward softmax classifier with exact gradients with
//! respect to both parameters and inputs.
//!
//! The hidden layers apply `tanh`; the last layer emits raw logits which
//! [`Classifier::forward`] turns into probabilities via a max-shifted softmax.
//!
//! # Parameter order
//!
//! Every routine that views parameters as a flat vector (snapshots, gradients,
//! Fisher diagonals, the Adam state) uses one fixed enumeration: layers in
//! order, and within each layer the weight matrix in row-major order
//! (`[out][in]`) followed by the bias vector. [`Classifier::flatten`] and
//! [`Classifier::set_from_flat`] are the canonical round-trip.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// One dense layer, `z = W x + b`, weights row-major with shape `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `out = W x + b`.
    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

/// A multiclass feed-forward classifier: `input_dim -> hidden... -> class_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    layers: Vec<DenseLayer>,
    input_dim: usize,
    class_count: usize,
}

/// Frozen copy of a classifier's flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSnapshot {
    values: Vec<f64>,
}

impl ParameterSnapshot {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Classifier {
    /// Builds a classifier with seeded Xavier-uniform weights
    /// (`±sqrt(6 / (fan_in + fan_out))`) and zero biases.
    pub fn new(input_dim: usize, hidden: &[usize], class_count: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || class_count == 0 {
            return Err(Error::Config(
                "input_dim and class_count must be positive".into(),
            ));
        }
        if hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        let mut rng = rng_from(seed);
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden);
        dims.push(class_count);

        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut layer = DenseLayer::zeros(fan_in, fan_out);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
            layers.push(layer);
        }
        Ok(Self {
            layers,
            input_dim,
            class_count,
        })
    }

    /// Rebuilds a classifier from an architecture and a flat parameter vector.
    pub fn from_flat(
        input_dim: usize,
        hidden: &[usize],
        class_count: usize,
        params: &[f64],
    ) -> Result<Self> {
        let mut model = Self::new(input_dim, hidden, class_count, 0)?;
        model.set_from_flat(params)?;
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Hidden layer widths, in order.
    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.out_dim)
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Flattens all parameters in the documented order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    /// Writes a flat parameter vector back into the layers.
    pub fn set_from_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch {
                what: "flat parameter vector",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> ParameterSnapshot {
        ParameterSnapshot {
            values: self.flatten(),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::ShapeMismatch {
                what: "input vector",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.class_count {
            return Err(Error::LabelOutOfRange {
                label,
                class_count: self.class_count,
            });
        }
        Ok(())
    }

    /// Runs the network and keeps every layer's activation for backprop.
    /// `activations[0]` is the input; the last entry holds raw logits.
    fn forward_cache(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.affine(activations.last().expect("nonempty"), &mut z);
            if k != last {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            activations.push(z);
        }
        activations
    }

    /// Class probabilities `softmax(logits)` for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let cache = self.forward_cache(x);
        Ok(softmax(cache.last().expect("logits")))
    }

    /// Predicted class: argmax of the probabilities, ties to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let probs = self.forward(x)?;
        Ok(argmax(&probs))
    }

    /// Per-sample cross-entropy gradients: returns the gradient with respect
    /// to the flat parameter vector and with respect to the input.
    fn backprop(&self, x: &[f64], label: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        self.check_label(label)?;
        let cache = self.forward_cache(x);
        let probs = softmax(cache.last().expect("logits"));

        // dCE/dlogits = p - e_label
        let mut delta: Vec<f64> = probs;
        delta[label] -= 1.0;

        let mut param_grad = vec![0.0; self.param_count()];
        let mut layer_offsets = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for layer in &self.layers {
            layer_offsets.push(offset);
            offset += layer.param_count();
        }

        let mut input_grad = Vec::new();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let a_in = &cache[k];
            let base = layer_offsets[k];
            for o in 0..layer.out_dim {
                let row = base + o * layer.in_dim;
                for i in 0..layer.in_dim {
                    param_grad[row + i] = delta[o] * a_in[i];
                }
            }
            let bias_base = base + layer.in_dim * layer.out_dim;
            param_grad[bias_base..bias_base + layer.out_dim].copy_from_slice(&delta);

            // push delta through W, then through tanh' (or to the input)
            let mut upstream = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let d = delta[o];
                for (u, w) in upstream.iter_mut().zip(row) {
                    *u += w * d;
                }
            }
            if k == 0 {
                input_grad = upstream;
            } else {
                for (u, a) in upstream.iter_mut().zip(&cache[k]) {
                    *u *= 1.0 - a * a;
                }
                delta = upstream;
            }
        }
        Ok((param_grad, input_grad))
    }

    /// Gradient of one sample's cross-entropy with respect to the flat
    /// parameter vector.
    pub fn sample_gradient(&self, x: &[f64], label: usize) -> Result<Vec<f64>> {
        Ok(self.backprop(x, label)?.0)
    }

    /// Gradient of the mean cross-entropy over a batch with respect to the
    /// flat parameter vector. Per-sample backprops may run in parallel; the
    /// reduction always folds in batch order.
    pub fn batch_gradient(&self, batch: &[(&[f64], usize)]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("gradient batch"));
        }
        let per_sample = crate::parallel::map_collect(batch, |(x, label)| {
            self.sample_gradient(x, *label)
        });
        let scale = 1.0 / batch.len() as f64;
        let mut acc = vec![0.0; self.param_count()];
        for grad in per_sample {
            let grad = grad?;
            for (a, g) in acc.iter_mut().zip(&grad) {
                *a += scale * g;
            }
        }
        Ok(acc)
    }

    /// Gradient of `cross_entropy(forward(x), label)` with respect to `x`.
    pub fn input_gradient(&self, x: &[f64], label: usize) -> Result<Vec<f64>> {
        Ok(self.backprop(x, label)?.1)
    }

    /// Mean cross-entropy of the model over labelled samples.
    pub fn mean_cross_entropy(&self, batch: &[(&[f64], usize)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("loss batch"));
        }
        let mut total = 0.0;
        for (x, label) in batch {
            total += cross_entropy(&self.forward(x)?, *label)?;
        }
        Ok(total / batch.len() as f64)
    }
}

/// Max-shifted softmax; finite logits give entries in `[0, 1]` summing to 1.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `-log(probs[label])`, with the probability floored at 1e-12 before the log
/// so saturated softmax outputs cannot produce infinities.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::LabelOutOfRange {
            label,
            class_count: probs.len(),
        });
    }
    Ok(-(probs[label].max(1e-12)).ln())
}

/// Trains the classifier in place on labelled data: mean cross-entropy
/// minibatches with seeded per-epoch shuffling and Adam updates.
pub fn train_classifier(
    model: &mut Classifier,
    ds: &crate::data::LabeledDataset,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    shuffle_seed: u64,
) -> Result<()> {
    use rand::seq::SliceRandom;
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let samples = ds.samples();
    let mut optimizer = Adam::new(model.param_count());
    let mut indices: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..epochs {
        let mut rng = rng_from(crate::rng::stream_seed(shuffle_seed, epoch as u64, 0));
        indices.shuffle(&mut rng);
        for chunk in indices.chunks(batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk
                .iter()
                .map(|&i| (samples[i].features.as_slice(), samples[i].label))
                .collect();
            let grad = model.batch_gradient(&batch)?;
            optimizer.step(model, &grad, lr)?;
        }
    }
    Ok(())
}

/// Adam optimizer state aligned to a classifier's flat parameter vector.
///
/// Decay constants 0.9 / 0.999 with bias correction and epsilon 1e-8.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(param_count: usize) -> Self {
        Self {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update in place and advances the state.
    pub fn step(&mut self, model: &mut Classifier, grad: &[f64], lr: f64) -> Result<()> {
        if grad.len() != self.first_moment.len() || grad.len() != model.param_count() {
            return Err(Error::ShapeMismatch {
                what: "gradient vector",
                expected: model.param_count(),
                got: grad.len(),
            });
        }
        if lr <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);

        let mut params = model.flatten();
        for k in 0..grad.len() {
            let g = grad[k];
            self.first_moment[k] = self.beta1 * self.first_moment[k] + (1.0 - self.beta1) * g;
            self.second_moment[k] =
                self.beta2 * self.second_moment[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[k] / bc1;
            let v_hat = self.second_moment[k] / bc2;
            params[k] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        model.set_from_flat(&params)
    }
}
