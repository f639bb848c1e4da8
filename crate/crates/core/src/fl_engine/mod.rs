//! Local training and global aggregation on a small feedforward
//! classifier with hand-written gradients.
//!
//! Every downstream consumer (aggregation, layer slicing, weight
//! divergence, clustering) sees only a flat parameter vector plus a
//! layer map of named contiguous ranges, so the engine stays agnostic
//! to the architecture behind the map.

mod checkpoint;
mod mlp;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use mlp::{evaluate, init_model, local_update, loss_gradient, mean_loss};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named contiguous range of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerRange {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

/// Flat parameter vector plus its layer map. Ranges are contiguous,
/// disjoint, cover the vector exactly, and carry unique names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    values: Vec<f64>,
    layer_map: Vec<LayerRange>,
}

impl ModelWeights {
    pub fn new(values: Vec<f64>, layer_map: Vec<LayerRange>) -> Result<Self> {
        let mut cursor = 0usize;
        for range in &layer_map {
            if range.start != cursor {
                return Err(Error::InvalidArgument(format!(
                    "layer {:?} starts at {}, expected {cursor}",
                    range.name, range.start
                )));
            }
            cursor += range.len;
            if layer_map
                .iter()
                .filter(|other| other.name == range.name)
                .count()
                > 1
            {
                return Err(Error::InvalidArgument(format!(
                    "duplicate layer name {:?}",
                    range.name
                )));
            }
        }
        if cursor != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "layer map covers {cursor} values, vector has {}",
                values.len()
            )));
        }
        Ok(Self { values, layer_map })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layer_map(&self) -> &[LayerRange] {
        &self.layer_map
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.values.len() == other.values.len() && self.layer_map == other.layer_map
    }

    /// The contiguous sub-vector of the named layer.
    pub fn layer_slice(&self, layer_name: &str) -> Result<&[f64]> {
        let range = self
            .layer_map
            .iter()
            .find(|r| r.name == layer_name)
            .ok_or_else(|| Error::UnknownLayer {
                name: layer_name.to_string(),
            })?;
        Ok(&self.values[range.start..range.start + range.len])
    }

    /// Replaces the parameter vector, keeping the map.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.layer_map.clone())
    }
}

/// Classifier shape: input width, hidden widths, class count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl LayerSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden_dims,
            output_dim,
        };
        if spec.dims().iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(
                "all layer dimensions must be >= 1".into(),
            ));
        }
        Ok(spec)
    }

    /// Widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims
    }

    pub fn num_linear_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    pub fn total_params(&self) -> usize {
        let dims = self.dims();
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// The layer map this shape induces: weight and bias ranges per
    /// linear layer, with the final pair named `fc_last` / `b_fc_last`.
    pub fn layer_map(&self) -> Vec<LayerRange> {
        let dims = self.dims();
        let last = self.num_linear_layers() - 1;
        let mut map = Vec::with_capacity(2 * self.num_linear_layers());
        let mut start = 0;
        for (l, w) in dims.windows(2).enumerate() {
            let (w_name, b_name) = if l == last {
                ("fc_last".to_string(), "b_fc_last".to_string())
            } else {
                (format!("w_fc{}", l + 1), format!("b_fc{}", l + 1))
            };
            let w_len = w[0] * w[1];
            map.push(LayerRange {
                name: w_name,
                start,
                len: w_len,
            });
            start += w_len;
            map.push(LayerRange {
                name: b_name,
                start,
                len: w[1],
            });
            start += w[1];
        }
        map
    }
}

/// Local training parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub local_iters: u32,
    pub learning_rate: f64,
    #[serde(default)]
    pub batch_size: BatchSize,
}

/// Full-batch gradient descent or seeded mini-batch SGD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchSize {
    #[default]
    Full,
    Size(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Size(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::String(s) if s == "full" => Ok(BatchSize::Full),
            serde_json::Value::Number(n) => n
                .as_u64()
                .filter(|&n| n >= 1)
                .map(|n| BatchSize::Size(n as usize))
                .ok_or_else(|| D::Error::custom("batch_size must be a positive integer")),
            other => Err(D::Error::custom(format!(
                "batch_size must be \"full\" or a positive integer, got {other}"
            ))),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.local_iters == 0 {
            return Err(Error::InvalidArgument("local_iters must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Data-size-weighted average of model weights: `Σ D_n·w_n / Σ D_n`.
pub fn aggregate(weights: &[ModelWeights], sizes: &[usize]) -> Result<ModelWeights> {
    if weights.is_empty() || weights.len() != sizes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weight vectors vs {} sizes",
            weights.len(),
            sizes.len()
        )));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidArgument("aggregation sizes must be > 0".into()));
    }
    let first = &weights[0];
    for w in &weights[1..] {
        if !w.same_layout(first) {
            return Err(Error::DimensionMismatch(
                "aggregation requires identical layer maps".into(),
            ));
        }
    }
    let total: f64 = sizes.iter().map(|&s| s as f64).sum();
    let mut acc = vec![0.0f64; first.len()];
    for (w, &size) in weights.iter().zip(sizes) {
        let scale = size as f64;
        for (a, v) in acc.iter_mut().zip(w.values()) {
            *a += scale * v;
        }
    }
    for a in &mut acc {
        *a /= total;
    }
    first.with_values(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(values: Vec<f64>) -> ModelWeights {
        let len = values.len();
        ModelWeights::new(
            values,
            vec![LayerRange {
                name: "all".into(),
                start: 0,
                len,
            }],
        )
        .unwrap()
    }

    #[test]
    fn layer_map_shapes() {
        let spec = LayerSpec::new(784, vec![64], 10).unwrap();
        assert_eq!(spec.total_params(), 784 * 64 + 64 + 64 * 10 + 10);
        let map = spec.layer_map();
        let names: Vec<&str> = map.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["w_fc1", "b_fc1", "fc_last", "b_fc_last"]);
        let fc_last = map.iter().find(|r| r.name == "fc_last").unwrap();
        assert_eq!(fc_last.len, 640);
    }

    #[test]
    fn table_style_cnn_layer_map_is_representable() {
        // A convolutional net's parameters are just ranges here: the
        // classic MNIST shape with a 2240-wide last linear layer and
        // 113744 parameters in total.
        let lens = [
            ("w_c1", 375),
            ("b_c1", 15),
            ("w_c2", 10500),
            ("b_c2", 28),
            ("w_fc1", 100_352),
            ("b_fc1", 224),
            ("w_fc2", 2240),
            ("b_fc2", 10),
        ];
        let mut map = Vec::new();
        let mut start = 0;
        for (name, len) in lens {
            map.push(LayerRange {
                name: name.into(),
                start,
                len,
            });
            start += len;
        }
        assert_eq!(start, 113_744);
        let w = ModelWeights::new(vec![0.0; start], map).unwrap();
        assert_eq!(w.layer_slice("w_fc2").unwrap().len(), 2240);
    }

    #[test]
    fn layer_slices_reassemble() {
        let spec = LayerSpec::new(6, vec![4], 3).unwrap();
        let w = init_model(&spec, 5);
        let mut rebuilt = Vec::new();
        for range in w.layer_map() {
            rebuilt.extend_from_slice(w.layer_slice(&range.name).unwrap());
        }
        assert_eq!(rebuilt, w.values());
        assert!(matches!(
            w.layer_slice("nope"),
            Err(Error::UnknownLayer { .. })
        ));
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(ModelWeights::new(
            vec![0.0; 3],
            vec![LayerRange {
                name: "a".into(),
                start: 1,
                len: 2
            }]
        )
        .is_err());
        assert!(ModelWeights::new(
            vec![0.0; 4],
            vec![
                LayerRange {
                    name: "a".into(),
                    start: 0,
                    len: 2
                },
                LayerRange {
                    name: "a".into(),
                    start: 2,
                    len: 2
                }
            ]
        )
        .is_err());
        assert!(ModelWeights::new(
            vec![0.0; 4],
            vec![LayerRange {
                name: "a".into(),
                start: 0,
                len: 2
            }]
        )
        .is_err());
    }

    #[test]
    fn aggregate_weighted_means() {
        let a = flat(vec![0.0, 0.0]);
        let b = flat(vec![2.0, 4.0]);
        let eq = aggregate(&[a.clone(), b.clone()], &[1, 1]).unwrap();
        assert_eq!(eq.values(), &[1.0, 2.0]);
        let weighted = aggregate(&[a.clone(), b.clone()], &[1, 3]).unwrap();
        assert_eq!(weighted.values(), &[1.5, 3.0]);
        let same = aggregate(&[a.clone(), a.clone()], &[2, 5]).unwrap();
        assert_eq!(same.values(), a.values());
    }

    #[test]
    fn aggregate_is_linear_and_permutation_invariant() {
        let a = flat(vec![1.0, -2.0, 0.5]);
        let b = flat(vec![0.25, 3.0, -1.0]);
        let c = flat(vec![-0.5, 0.0, 2.0]);
        let sizes = [3usize, 5, 2];
        let base = aggregate(&[a.clone(), b.clone(), c.clone()], &sizes).unwrap();

        let scale = 2.5;
        let scaled: Vec<ModelWeights> = [&a, &b, &c]
            .iter()
            .map(|w| flat(w.values().iter().map(|v| v * scale).collect()))
            .collect();
        let scaled_agg = aggregate(&scaled, &sizes).unwrap();
        for (s, v) in scaled_agg.values().iter().zip(base.values()) {
            assert!((s - scale * v).abs() < 1e-12);
        }

        let perm = aggregate(&[c, a, b], &[2, 3, 5]).unwrap();
        for (p, v) in perm.values().iter().zip(base.values()) {
            assert!((p - v).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_rejects_mismatched_maps() {
        let a = flat(vec![0.0, 0.0]);
        let spec = LayerSpec::new(1, vec![], 2).unwrap();
        let b = init_model(&spec, 0);
        assert!(aggregate(&[a.clone(), b], &[1, 1]).is_err());
        assert!(aggregate(&[a.clone(), a], &[1, 0]).is_err());
        assert!(aggregate(&[], &[]).is_err());
    }

    #[test]
    fn batch_size_serde() {
        let full: BatchSize = serde_json::from_str("\"full\"").unwrap();
        assert_eq!(full, BatchSize::Full);
        let sized: BatchSize = serde_json::from_str("32").unwrap();
        assert_eq!(sized, BatchSize::Size(32));
        assert!(serde_json::from_str::<BatchSize>("0").is_err());
        assert!(serde_json::from_str::<BatchSize>("\"half\"").is_err());
        assert_eq!(serde_json::to_string(&BatchSize::Full).unwrap(), "\"full\"");
    }
}
