//! Feedforward classifier: tanh hidden layers, softmax cross-entropy
//! output, gradients written out by hand.

use rand::Rng;

use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::derive_rng;

use super::{BatchSize, LayerSpec, ModelWeights, TrainConfig};

/// Deterministic initialization: weights uniform in
/// `±sqrt(6/(fan_in+fan_out))`, biases zero.
pub fn init_model(spec: &LayerSpec, seed: u64) -> ModelWeights {
    let dims = spec.dims();
    let mut rng = derive_rng(seed, "init", &[]);
    let mut values = Vec::with_capacity(spec.total_params());
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            values.push(rng.gen_range(-bound..bound));
        }
        values.extend(std::iter::repeat(0.0).take(fan_out));
    }
    ModelWeights::new(values, spec.layer_map()).expect("spec-induced map is consistent")
}

/// Weight matrix and bias offsets per linear layer within the flat
/// vector. Weights are row-major `[out][in]`.
struct Offsets {
    layers: Vec<(usize, usize, usize, usize)>, // (w_start, b_start, in, out)
}

impl Offsets {
    fn of(spec: &LayerSpec) -> Self {
        let dims = spec.dims();
        let mut layers = Vec::with_capacity(spec.num_linear_layers());
        let mut start = 0;
        for w in dims.windows(2) {
            let w_start = start;
            let b_start = start + w[0] * w[1];
            layers.push((w_start, b_start, w[0], w[1]));
            start = b_start + w[1];
        }
        Self { layers }
    }
}

fn check_dims(spec: &LayerSpec, weights: &ModelWeights, data: &LabeledDataset) -> Result<()> {
    if weights.len() != spec.total_params() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters vs spec's {}",
            weights.len(),
            spec.total_params()
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if data.dim() != spec.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "feature dim {} vs input dim {}",
            data.dim(),
            spec.input_dim
        )));
    }
    if data.num_classes() > spec.output_dim {
        return Err(Error::DimensionMismatch(format!(
            "{} classes vs output dim {}",
            data.num_classes(),
            spec.output_dim
        )));
    }
    Ok(())
}

/// Activations of every layer for one input, ending with raw logits.
fn forward(offsets: &Offsets, values: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(offsets.layers.len() + 1);
    acts.push(x.to_vec());
    let last = offsets.layers.len() - 1;
    for (l, &(w_start, b_start, d_in, d_out)) in offsets.layers.iter().enumerate() {
        let input = acts.last().expect("seeded with x");
        let mut out = Vec::with_capacity(d_out);
        for o in 0..d_out {
            let row = &values[w_start + o * d_in..w_start + (o + 1) * d_in];
            let mut z = values[b_start + o];
            for (w, xi) in row.iter().zip(input) {
                z += w * xi;
            }
            out.push(if l < last { z.tanh() } else { z });
        }
        acts.push(out);
    }
    acts
}

fn log_softmax_loss(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let log_sum = logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[label]
}

/// Mean cross-entropy loss and its gradient over the whole dataset
/// (or the subset at `indices` when given).
fn loss_gradient_on(
    offsets: &Offsets,
    values: &[f64],
    data: &LabeledDataset,
    indices: Option<&[usize]>,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0f64; values.len()];
    let mut loss = 0.0;
    let count = indices.map_or(data.len(), <[usize]>::len);
    let iter: Box<dyn Iterator<Item = usize>> = match indices {
        Some(idx) => Box::new(idx.iter().copied()),
        None => Box::new(0..data.len()),
    };
    for i in iter {
        let x = &data.features()[i];
        let label = data.labels()[i];
        let acts = forward(offsets, values, x);
        let logits = acts.last().expect("at least one layer");
        loss += log_softmax_loss(logits, label);

        // output delta: softmax(logits) − one-hot(label)
        let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let mut delta: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        delta[label] -= 1.0;

        for (l, &(w_start, b_start, d_in, d_out)) in offsets.layers.iter().enumerate().rev() {
            let input = &acts[l];
            for o in 0..d_out {
                let dz = delta[o];
                let row = &mut grad[w_start + o * d_in..w_start + (o + 1) * d_in];
                for (g, xi) in row.iter_mut().zip(input) {
                    *g += dz * xi;
                }
                grad[b_start + o] += dz;
            }
            if l > 0 {
                // backprop through the tanh activation of layer l-1
                let mut prev = vec![0.0f64; d_in];
                for o in 0..d_out {
                    let dz = delta[o];
                    let row = &values[w_start + o * d_in..w_start + (o + 1) * d_in];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += dz * w;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }
    let scale = 1.0 / count as f64;
    loss *= scale;
    for g in &mut grad {
        *g *= scale;
    }
    (loss, grad)
}

/// Mean cross-entropy loss and its analytic gradient on `data`.
pub fn loss_gradient(
    spec: &LayerSpec,
    weights: &ModelWeights,
    data: &LabeledDataset,
) -> Result<(f64, Vec<f64>)> {
    check_dims(spec, weights, data)?;
    Ok(loss_gradient_on(
        &Offsets::of(spec),
        weights.values(),
        data,
        None,
    ))
}

/// Mean cross-entropy loss on `data`.
pub fn mean_loss(spec: &LayerSpec, weights: &ModelWeights, data: &LabeledDataset) -> Result<f64> {
    check_dims(spec, weights, data)?;
    let offsets = Offsets::of(spec);
    let mut loss = 0.0;
    for (x, &label) in data.features().iter().zip(data.labels()) {
        let acts = forward(&offsets, weights.values(), x);
        loss += log_softmax_loss(acts.last().expect("at least one layer"), label);
    }
    Ok(loss / data.len() as f64)
}

/// Runs `local_iters` gradient-descent steps `w ← w − ζ·∇F(w)`.
/// Full-batch by default; with a mini-batch size, each step samples a
/// fresh batch without replacement from an RNG derived from `seed` and
/// the step index.
pub fn local_update(
    spec: &LayerSpec,
    weights: &ModelWeights,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<ModelWeights> {
    cfg.validate()?;
    check_dims(spec, weights, data)?;
    let offsets = Offsets::of(spec);
    let mut values = weights.values().to_vec();
    for step in 0..cfg.local_iters {
        let batch: Option<Vec<usize>> = match cfg.batch_size {
            BatchSize::Full => None,
            BatchSize::Size(size) => {
                let size = size.min(data.len());
                let mut rng = derive_rng(seed, "batch", &[u64::from(step)]);
                Some(rand::seq::index::sample(&mut rng, data.len(), size).into_vec())
            }
        };
        let (_, grad) = loss_gradient_on(&offsets, &values, data, batch.as_deref());
        for (v, g) in values.iter_mut().zip(&grad) {
            *v -= cfg.learning_rate * g;
        }
    }
    weights.with_values(values)
}

/// Fraction of argmax-correct predictions; ties resolve to the lowest
/// class index.
pub fn evaluate(spec: &LayerSpec, weights: &ModelWeights, data: &LabeledDataset) -> Result<f64> {
    check_dims(spec, weights, data)?;
    let offsets = Offsets::of(spec);
    let mut correct = 0usize;
    for (x, &label) in data.features().iter().zip(data.labels()) {
        let acts = forward(&offsets, weights.values(), x);
        let logits = acts.last().expect("at least one layer");
        let mut arg = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[arg] {
                arg = i;
            }
        }
        if arg == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
