//! Synthetic data generation and the non-iid partitioners.

mod idx;

pub use idx::{load_idx, write_idx};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_rng;

/// Feature vectors with class labels in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature vectors vs {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(dim) = features.first().map(Vec::len) {
            if let Some(bad) = features.iter().find(|f| f.len() != dim) {
                return Err(Error::DimensionMismatch(format!(
                    "feature dims vary: {} vs {}",
                    dim,
                    bad.len()
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The subset at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let f = self.features.get(i).ok_or_else(|| {
                Error::InvalidArgument(format!("index {i} out of range {}", self.len()))
            })?;
            features.push(f.clone());
            labels.push(self.labels[i]);
        }
        Self::new(features, labels, self.num_classes)
    }

    /// Per-class sample counts.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.num_classes];
        for &l in &self.labels {
            hist[l] += 1;
        }
        hist
    }
}

/// Per-device datasets plus the ground-truth majority class of each
/// device (the clustering target) and the source indices for audit.
#[derive(Debug, Clone)]
pub struct PartitionedData {
    pub per_device: Vec<LabeledDataset>,
    pub majority_class: Vec<usize>,
    pub per_device_indices: Vec<Vec<usize>>,
}

/// JSON-exportable audit record of a partition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub devices: Vec<PartitionManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionManifestEntry {
    pub device: usize,
    pub majority_class: usize,
    pub sample_indices: Vec<usize>,
}

impl PartitionedData {
    pub fn num_devices(&self) -> usize {
        self.per_device.len()
    }

    pub fn manifest(&self) -> PartitionManifest {
        PartitionManifest {
            devices: self
                .per_device_indices
                .iter()
                .zip(&self.majority_class)
                .enumerate()
                .map(|(device, (indices, &majority_class))| PartitionManifestEntry {
                    device,
                    majority_class,
                    sample_indices: indices.clone(),
                })
                .collect(),
        }
    }
}

/// Gaussian class blobs: each class mean sits at `separation` times a
/// seeded random unit direction, samples add unit-variance noise.
/// Samples are ordered class-major; deterministic per seed.
pub fn gen_synthetic(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> LabeledDataset {
    assert!(num_classes >= 1 && per_class >= 1 && dim >= 1, "counts must be >= 1");
    let mut rng = derive_rng(seed, "synthetic", &[]);
    let normal = StandardNormal;
    let means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x / norm * separation).collect()
        })
        .collect();
    let mut features = Vec::with_capacity(num_classes * per_class);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            let noise: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
            features.push(mean.iter().zip(&noise).map(|(m, n)| m + n).collect());
            labels.push(class);
        }
    }
    LabeledDataset::new(features, labels, num_classes).expect("construction is consistent")
}

/// Draws without replacement from per-class pools shuffled once per seed.
struct ClassPools {
    pools: Vec<Vec<usize>>,
}

impl ClassPools {
    fn new(data: &LabeledDataset, seed: u64) -> Self {
        let mut pools: Vec<Vec<usize>> = vec![Vec::new(); data.num_classes()];
        for (i, &l) in data.labels().iter().enumerate() {
            pools[l].push(i);
        }
        for (class, pool) in pools.iter_mut().enumerate() {
            pool.shuffle(&mut derive_rng(seed, "pool", &[class as u64]));
        }
        Self { pools }
    }

    fn draw(&mut self, class: usize, count: usize, sink: &mut Vec<usize>) -> Result<()> {
        let pool = &mut self.pools[class];
        if pool.len() < count {
            return Err(Error::InsufficientSamples {
                class,
                needed: count,
                available: pool.len(),
            });
        }
        sink.extend(pool.drain(pool.len() - count..));
        Ok(())
    }
}

/// Label-skewed partition: device `i`'s majority class is `i mod K`
/// (round-robin, so all classes are covered once `num_devices >= K`);
/// `floor(D·sigma)` samples come from it and the rest spread evenly over
/// the other classes. Every device gets `floor(len/num_devices)` samples,
/// drawn without replacement.
pub fn partition_noniid(
    data: &LabeledDataset,
    num_devices: usize,
    sigma: f64,
    seed: u64,
) -> Result<PartitionedData> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::InvalidArgument(format!(
            "bias sigma must lie in [0, 1], got {sigma}"
        )));
    }
    let per_device = partition_size(data, num_devices)?;
    let num_classes = data.num_classes();
    if num_classes < 2 {
        return Err(Error::InvalidArgument(
            "non-iid partition needs at least 2 classes".into(),
        ));
    }
    let mut pools = ClassPools::new(data, seed);
    let mut devices = Vec::with_capacity(num_devices);
    let mut majorities = Vec::with_capacity(num_devices);
    let mut all_indices = Vec::with_capacity(num_devices);
    for device in 0..num_devices {
        let majority = device % num_classes;
        let n_major = (per_device as f64 * sigma).floor() as usize;
        let rest = per_device - n_major;
        let base = rest / (num_classes - 1);
        let extra = rest % (num_classes - 1);
        let mut indices = Vec::with_capacity(per_device);
        pools.draw(majority, n_major, &mut indices)?;
        // walk the other classes starting right after the majority so
        // the rounding extras spread evenly across devices
        for j in 0..num_classes - 1 {
            let class = (majority + 1 + j) % num_classes;
            pools.draw(class, base + usize::from(j < extra), &mut indices)?;
        }
        devices.push(data.subset(&indices)?);
        majorities.push(majority);
        all_indices.push(indices);
    }
    Ok(PartitionedData {
        per_device: devices,
        majority_class: majorities,
        per_device_indices: all_indices,
    })
}

/// Two-label partition: 80% of each device's data from its majority
/// class, 20% from one distinct secondary class. Majorities walk a
/// seeded permutation round-robin (all classes covered once
/// `num_devices >= K`); the secondary is the class a seeded offset
/// further along the same permutation, which keeps per-class demand
/// balanced against the finite pools.
pub fn partition_two_class(
    data: &LabeledDataset,
    num_devices: usize,
    seed: u64,
) -> Result<PartitionedData> {
    let per_device = partition_size(data, num_devices)?;
    let num_classes = data.num_classes();
    if num_classes < 2 {
        return Err(Error::InvalidArgument(
            "two-class partition needs at least 2 classes".into(),
        ));
    }
    let mut rng = derive_rng(seed, "two_class_pairs", &[]);
    let mut majors: Vec<usize> = (0..num_classes).collect();
    majors.shuffle(&mut rng);
    let offset = rng.gen_range(1..num_classes);
    let mut pools = ClassPools::new(data, seed);
    let mut devices = Vec::with_capacity(num_devices);
    let mut majorities = Vec::with_capacity(num_devices);
    let mut all_indices = Vec::with_capacity(num_devices);
    for device in 0..num_devices {
        let majority = majors[device % num_classes];
        let secondary = majors[(device + offset) % num_classes];
        let n_major = (per_device as f64 * 0.8).floor() as usize;
        let mut indices = Vec::with_capacity(per_device);
        pools.draw(majority, n_major, &mut indices)?;
        pools.draw(secondary, per_device - n_major, &mut indices)?;
        devices.push(data.subset(&indices)?);
        majorities.push(majority);
        all_indices.push(indices);
    }
    Ok(PartitionedData {
        per_device: devices,
        majority_class: majorities,
        per_device_indices: all_indices,
    })
}

fn partition_size(data: &LabeledDataset, num_devices: usize) -> Result<usize> {
    if num_devices == 0 {
        return Err(Error::InvalidArgument("need at least one device".into()));
    }
    let per_device = data.len() / num_devices;
    if per_device == 0 {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot cover {num_devices} devices",
            data.len()
        )));
    }
    Ok(per_device)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn synthetic_shapes_and_determinism() {
        let d = gen_synthetic(5, 20, 8, 3.0, 9);
        assert_eq!(d.len(), 100);
        assert_eq!(d.dim(), 8);
        assert_eq!(d.label_histogram(), vec![20; 5]);
        let d2 = gen_synthetic(5, 20, 8, 3.0, 9);
        assert_eq!(d, d2);
        assert_ne!(d, gen_synthetic(5, 20, 8, 3.0, 10));
    }

    #[test]
    fn noniid_histogram_matches_sigma() {
        // 500 per device at sigma 0.8 over 10 classes: 400 majority,
        // the remaining 100 split 12/11/.../11 over the other 9.
        let data = gen_synthetic(10, 500, 4, 2.0, 1);
        let parts = partition_noniid(&data, 10, 0.8, 1).unwrap();
        for (i, dev) in parts.per_device.iter().enumerate() {
            assert_eq!(dev.len(), 500);
            let hist = dev.label_histogram();
            let maj = parts.majority_class[i];
            assert_eq!(hist[maj], 400);
            for (c, &count) in hist.iter().enumerate() {
                if c != maj {
                    assert!(
                        count == 11 || count == 12,
                        "class {c} count {count} not ~11"
                    );
                }
            }
            // ground truth equals an empirical mode
            assert!(hist.iter().all(|&c| c <= hist[maj]));
        }
    }

    #[test]
    fn noniid_low_sigma_is_near_uniform() {
        let data = gen_synthetic(10, 500, 4, 2.0, 2);
        let parts = partition_noniid(&data, 10, 0.1, 2).unwrap();
        for dev in &parts.per_device {
            let hist = dev.label_histogram();
            assert!(hist.iter().all(|&c| c == 50), "histogram {hist:?}");
        }
    }

    #[test]
    fn noniid_majorities_round_robin_and_disjoint() {
        let data = gen_synthetic(5, 400, 4, 2.0, 3);
        let parts = partition_noniid(&data, 10, 0.8, 3).unwrap();
        for (i, &m) in parts.majority_class.iter().enumerate() {
            assert_eq!(m, i % 5);
        }
        let mut seen = HashSet::new();
        for indices in &parts.per_device_indices {
            for &i in indices {
                assert!(seen.insert(i), "index {i} assigned twice");
            }
        }
    }

    #[test]
    fn noniid_errors_name_the_short_class() {
        // two devices over three classes: each wants all 15 samples from
        // its majority class, but every class pool holds only 10
        let data = gen_synthetic(3, 10, 4, 2.0, 4);
        let err = partition_noniid(&data, 2, 1.0, 4).unwrap_err();
        match err {
            Error::InsufficientSamples {
                class,
                needed,
                available,
            } => {
                assert!(class < 3);
                assert_eq!(needed, 15);
                assert_eq!(available, 10);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn two_class_structure() {
        let data = gen_synthetic(5, 400, 4, 2.0, 5);
        let parts = partition_two_class(&data, 10, 5).unwrap();
        let mut majors_seen = HashSet::new();
        for (i, dev) in parts.per_device.iter().enumerate() {
            let hist = dev.label_histogram();
            let present: Vec<usize> = hist
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(c, _)| c)
                .collect();
            assert_eq!(present.len(), 2, "device {i} covers {present:?}");
            let maj = parts.majority_class[i];
            let frac = hist[maj] as f64 / dev.len() as f64;
            assert!(
                (frac - 0.8).abs() <= 1.0 / dev.len() as f64 + 1e-12,
                "majority fraction {frac}"
            );
            majors_seen.insert(maj);
        }
        // 10 devices over 5 classes: every class is someone's majority
        assert_eq!(majors_seen.len(), 5);
    }

    #[test]
    fn partitions_are_deterministic() {
        let data = gen_synthetic(5, 100, 4, 2.0, 6);
        let a = partition_noniid(&data, 5, 0.7, 6).unwrap();
        let b = partition_noniid(&data, 5, 0.7, 6).unwrap();
        assert_eq!(a.per_device_indices, b.per_device_indices);
        let c = partition_two_class(&data, 5, 6).unwrap();
        let d = partition_two_class(&data, 5, 6).unwrap();
        assert_eq!(c.per_device_indices, d.per_device_indices);
    }

    #[test]
    fn manifest_round_trips_as_json() {
        let data = gen_synthetic(3, 50, 4, 2.0, 7);
        let parts = partition_noniid(&data, 3, 0.5, 7).unwrap();
        let json = serde_json::to_string(&parts.manifest()).unwrap();
        let back: PartitionManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.devices.len(), 3);
        assert_eq!(back.devices[1].majority_class, parts.majority_class[1]);
        assert_eq!(back.devices[2].sample_indices, parts.per_device_indices[2]);
    }
}
