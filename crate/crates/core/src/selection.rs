//! Per-round device selection: uniform random, cluster-random, and
//! weight-divergence top-s.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl_engine::ModelWeights;
use crate::rng::derive_rng;

/// The devices participating in one round, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSet {
    pub device_ids: Vec<usize>,
    pub round: usize,
    /// Clusters that had fewer members than requested and contributed
    /// everything they had.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undersized_clusters: Vec<usize>,
}

impl SelectionSet {
    fn new(mut device_ids: Vec<usize>, round: usize, undersized: Vec<usize>) -> Self {
        device_ids.sort_unstable();
        Self {
            device_ids,
            round,
            undersized_clusters: undersized,
        }
    }

    pub fn len(&self) -> usize {
        self.device_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.device_ids.is_empty()
    }
}

/// Uniform sample of `s` of `n` devices without replacement,
/// deterministic per (seed, round).
pub fn select_random(n: usize, s: usize, seed: u64, round: usize) -> Result<SelectionSet> {
    if s > n {
        return Err(Error::InvalidArgument(format!(
            "cannot select {s} of {n} devices"
        )));
    }
    let mut rng = derive_rng(seed, "select_random", &[round as u64]);
    let ids = sample(&mut rng, n, s).into_vec();
    Ok(SelectionSet::new(ids, round, Vec::new()))
}

/// `s` uniform picks from every non-empty cluster; clusters smaller than
/// `s` contribute all members and are flagged.
pub fn select_cluster_random(
    clusters: &[Vec<usize>],
    s: usize,
    seed: u64,
    round: usize,
) -> Result<SelectionSet> {
    if clusters.is_empty() {
        return Err(Error::InvalidArgument("no clusters to select from".into()));
    }
    let mut ids = Vec::new();
    let mut undersized = Vec::new();
    for (c, members) in clusters.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() <= s {
            if members.len() < s {
                undersized.push(c);
            }
            ids.extend_from_slice(members);
        } else {
            let mut rng = derive_rng(seed, "select_cluster", &[round as u64, c as u64]);
            ids.extend(sample(&mut rng, members.len(), s).iter().map(|i| members[i]));
        }
    }
    Ok(SelectionSet::new(ids, round, undersized))
}

/// Euclidean distance between two full weight vectors (all layers).
pub fn weight_divergence(local: &ModelWeights, global: &ModelWeights) -> Result<f64> {
    if !local.same_layout(global) {
        return Err(Error::DimensionMismatch(
            "weight divergence requires identical layer maps".into(),
        ));
    }
    Ok(local
        .values()
        .iter()
        .zip(global.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// From every cluster, the `s` devices with the largest divergence from
/// the global model; ties break toward the lowest device id. Fully
/// deterministic (no RNG).
pub fn select_weight_divergence(
    clusters: &[Vec<usize>],
    device_weights: &[ModelWeights],
    global: &ModelWeights,
    s: usize,
    round: usize,
) -> Result<SelectionSet> {
    if clusters.is_empty() {
        return Err(Error::InvalidArgument("no clusters to select from".into()));
    }
    let mut ids = Vec::new();
    let mut undersized = Vec::new();
    for (c, members) in clusters.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut scored: Vec<(f64, usize)> = members
            .iter()
            .map(|&id| {
                let w = device_weights.get(id).ok_or_else(|| {
                    Error::InvalidArgument(format!("device {id} has no weights"))
                })?;
                Ok((weight_divergence(w, global)?, id))
            })
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("divergences are finite")
                .then(a.1.cmp(&b.1))
        });
        if members.len() < s {
            undersized.push(c);
        }
        ids.extend(scored.iter().take(s).map(|(_, id)| *id));
    }
    Ok(SelectionSet::new(ids, round, undersized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl_engine::{LayerRange, ModelWeights};

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
    fn random_selects_everything_when_s_is_n() {
        let set = select_random(7, 7, 1, 0).unwrap();
        assert_eq!(set.device_ids, (0..7).collect::<Vec<_>>());
        assert!(select_random(3, 4, 1, 0).is_err());
    }

    #[test]
    fn random_is_deterministic_per_round() {
        let a = select_random(50, 10, 9, 3).unwrap();
        let b = select_random(50, 10, 9, 3).unwrap();
        assert_eq!(a, b);
        let c = select_random(50, 10, 9, 4).unwrap();
        assert_ne!(a.device_ids, c.device_ids);
    }

    #[test]
    fn random_frequencies_are_uniform() {
        // Monte-Carlo over 10^4 rounds: per-device frequency ~ s/n.
        let (n, s, rounds) = (20usize, 5usize, 10_000usize);
        let mut counts = vec![0usize; n];
        for round in 0..rounds {
            for id in select_random(n, s, 77, round).unwrap().device_ids {
                counts[id] += 1;
            }
        }
        let expect = s as f64 / n as f64;
        for (id, &c) in counts.iter().enumerate() {
            let freq = c as f64 / rounds as f64;
            assert!(
                (freq - expect).abs() <= 0.02,
                "device {id} frequency {freq}, expected {expect}"
            );
        }
    }

    #[test]
    fn cluster_random_takes_s_per_cluster() {
        let clusters = vec![vec![0, 1, 2], vec![3, 4], vec![5, 6, 7, 8]];
        let set = select_cluster_random(&clusters, 1, 5, 2).unwrap();
        assert_eq!(set.len(), 3);
        for (members, chosen) in clusters.iter().zip(0..) {
            let _ = chosen;
            assert_eq!(
                set.device_ids
                    .iter()
                    .filter(|id| members.contains(id))
                    .count(),
                1
            );
        }
        assert!(set.undersized_clusters.is_empty());
        assert!(select_cluster_random(&[], 1, 5, 2).is_err());
    }

    #[test]
    fn cluster_random_small_cluster_contributes_all() {
        let clusters = vec![vec![0, 1], vec![2, 3, 4, 5]];
        let set = select_cluster_random(&clusters, 3, 5, 0).unwrap();
        assert!(set.device_ids.contains(&0) && set.device_ids.contains(&1));
        assert_eq!(set.len(), 5);
        assert_eq!(set.undersized_clusters, vec![0]);
    }

    #[test]
    fn divergence_is_a_metric_on_samples() {
        let a = flat(vec![1.0, 2.0, 3.0]);
        assert_eq!(weight_divergence(&a, &a).unwrap(), 0.0);
        let b = flat(vec![4.0, 6.0, 3.0]);
        assert_eq!(weight_divergence(&a, &b).unwrap(), 5.0);
        assert_eq!(
            weight_divergence(&a, &b).unwrap(),
            weight_divergence(&b, &a).unwrap()
        );
        // triangle inequality on random triples
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(3);
        for _ in 0..100 {
            let x = flat((0..5).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let y = flat((0..5).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let z = flat((0..5).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let xy = weight_divergence(&x, &y).unwrap();
            let yz = weight_divergence(&y, &z).unwrap();
            let xz = weight_divergence(&x, &z).unwrap();
            assert!(xz <= xy + yz + 1e-12);
        }
        let short = flat(vec![0.0]);
        assert!(weight_divergence(&a, &short).is_err());
    }

    #[test]
    fn divergence_selection_picks_the_outlier() {
        // Shape of the one-cluster scenario: nine devices with known
        // divergences, the 16.92 outlier (third in the cluster) wins.
        let global = flat(vec![0.0; 4]);
        let divergences = [5.09, 5.33, 16.92, 6.90, 5.40, 5.32, 7.39, 6.56, 5.87];
        let weights: Vec<ModelWeights> = divergences
            .iter()
            .map(|&d| flat(vec![d, 0.0, 0.0, 0.0]))
            .collect();
        let cluster: Vec<usize> = (0..9).collect();
        let set =
            select_weight_divergence(&[cluster], &weights, &global, 1, 0).unwrap();
        assert_eq!(set.device_ids, vec![2]);
    }

    #[test]
    fn divergence_ties_break_to_lowest_id() {
        let global = flat(vec![0.0; 2]);
        let weights: Vec<ModelWeights> = (0..4).map(|_| flat(vec![1.0, 0.0])).collect();
        let set =
            select_weight_divergence(&[vec![0, 1, 2, 3]], &weights, &global, 2, 1).unwrap();
        assert_eq!(set.device_ids, vec![0, 1]);
    }

    #[test]
    fn divergence_selection_matches_full_sort() {
        // Oracle: a plain sort of (divergence, id) per cluster.
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(8);
        let global = flat(vec![0.0; 3]);
        let weights: Vec<ModelWeights> = (0..30)
            .map(|_| flat((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let clusters = vec![
            (0..10).collect::<Vec<_>>(),
            (10..18).collect(),
            (18..30).collect(),
        ];
        let s = 3;
        let set = select_weight_divergence(&clusters, &weights, &global, s, 0).unwrap();
        let mut expected = Vec::new();
        for cluster in &clusters {
            let mut scored: Vec<(f64, usize)> = cluster
                .iter()
                .map(|&id| (weight_divergence(&weights[id], &global).unwrap(), id))
                .collect();
            scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            expected.extend(scored.iter().take(s).map(|(_, id)| *id));
        }
        expected.sort_unstable();
        assert_eq!(set.device_ids, expected);
        assert_eq!(set.len(), clusters.len() * s);
    }
}
