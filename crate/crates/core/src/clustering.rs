//! K-means over layer-sliced model weights, plus the adjusted Rand
//! index for scoring cluster assignments against ground truth.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl_engine::ModelWeights;
use crate::rng::derive_rng;

const N_RESTARTS: u64 = 10;

/// Fitted centroids; `feature_layer` records which layer slice fed the
/// fit when the features came from model weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub feature_layer: Option<String>,
    pub inertia: f64,
}

/// Per-point cluster indices in `[0, c)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
}

impl ClusterAssignment {
    /// Members of each cluster, by point index.
    pub fn groups(&self, num_clusters: usize) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); num_clusters];
        for (i, &c) in self.labels.iter().enumerate() {
            groups[c].push(i);
        }
        groups
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// One Lloyd run from given starting centroids. Alternates nearest-
/// centroid assignment and centroid means until assignments stabilize;
/// an emptied cluster is re-seeded to the point farthest from its own
/// centroid. `inertia_trace` holds the within-cluster sum of squares
/// after every assignment step.
pub struct LloydRun {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub inertia_trace: Vec<f64>,
    pub converged: bool,
}

pub fn lloyd_run(features: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iters: usize) -> LloydRun {
    let c = centroids.len();
    let mut labels = vec![usize::MAX; features.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, point) in features.iter().enumerate() {
            let (assignment, d) = nearest(point, &centroids);
            inertia += d;
            if labels[i] != assignment {
                labels[i] = assignment;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            converged = true;
            break;
        }
        let dim = features[0].len();
        let mut sums = vec![vec![0.0f64; dim]; c];
        let mut counts = vec![0usize; c];
        for (point, &l) in features.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(point) {
                *s += x;
            }
        }
        for (cluster, (sum, &count)) in sums.iter_mut().zip(&counts).enumerate() {
            if count > 0 {
                for s in sum.iter_mut() {
                    *s /= count as f64;
                }
                centroids[cluster] = sum.clone();
            } else {
                // re-seed to the point farthest from its current centroid
                let far = features
                    .iter()
                    .enumerate()
                    .max_by(|(i, a), (j, b)| {
                        let da = squared_distance(a, &centroids[labels[*i]]);
                        let db = squared_distance(b, &centroids[labels[*j]]);
                        da.partial_cmp(&db).expect("distances are finite")
                    })
                    .map(|(i, _)| i)
                    .expect("features non-empty");
                centroids[cluster] = features[far].clone();
            }
        }
    }
    let inertia = *trace.last().expect("at least one assignment pass");
    LloydRun {
        centroids,
        labels,
        inertia,
        inertia_trace: trace,
        converged,
    }
}

/// Distance-weighted (k-means++ style) seeding.
fn seed_centroids(features: &[Vec<f64>], c: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centroids = Vec::with_capacity(c);
    centroids.push(features[rng.gen_range(0..features.len())].clone());
    while centroids.len() < c {
        let weights: Vec<f64> = features
            .iter()
            .map(|p| nearest(p, &centroids).1)
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..features.len())
        } else {
            let mut draw = rng.gen::<f64>() * total;
            let mut chosen = features.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                draw -= w;
                if draw <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(features[next].clone());
    }
    centroids
}

/// Best of ten seeded Lloyd runs by within-cluster sum of squares.
pub fn kmeans_fit(
    features: &[Vec<f64>],
    c: usize,
    seed: u64,
    max_iters: usize,
) -> Result<(ClusterModel, ClusterAssignment)> {
    if c == 0 {
        return Err(Error::InvalidArgument("need at least one cluster".into()));
    }
    if features.len() < c {
        return Err(Error::InvalidArgument(format!(
            "{} points cannot fill {c} clusters",
            features.len()
        )));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch("feature dims vary".into()));
    }
    let mut best: Option<LloydRun> = None;
    for restart in 0..N_RESTARTS {
        let mut rng = derive_rng(seed, "kmeans", &[restart]);
        let init = seed_centroids(features, c, &mut rng);
        let run = lloyd_run(features, init, max_iters);
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    Ok((
        ClusterModel {
            centroids: run.centroids,
            feature_layer: None,
            inertia: run.inertia,
        },
        ClusterAssignment { labels: run.labels },
    ))
}

/// Clusters devices by one named layer slice of their trained weights.
/// Runs once, at the initial round, after every device has trained.
pub fn cluster_devices(
    device_weights: &[ModelWeights],
    layer_name: &str,
    c: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    let features: Result<Vec<Vec<f64>>> = device_weights
        .iter()
        .map(|w| w.layer_slice(layer_name).map(<[f64]>::to_vec))
        .collect();
    let (_, assignment) = kmeans_fit(&features?, c, seed, 300)?;
    Ok(assignment)
}

/// Adjusted Rand index over pair counts: with `b11` pairs grouped
/// together in both labelings, `b00` separated in both, and `b01`/`b10`
/// the disagreements, the score is
/// `2(b00·b11 − b01·b10) / [(b00+b01)(b01+b11) + (b00+b10)(b10+b11)]` —
/// 1 for identical partitions, near 0 for independent ones.
pub fn adjusted_rand_index(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted labels vs {} ground-truth",
            pred.len(),
            truth.len()
        )));
    }
    let n = pred.len();
    let (mut b00, mut b01, mut b10, mut b11) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let same_pred = pred[i] == pred[j];
            let same_truth = truth[i] == truth[j];
            match (same_pred, same_truth) {
                (true, true) => b11 += 1.0,
                (false, false) => b00 += 1.0,
                (true, false) => b01 += 1.0,
                (false, true) => b10 += 1.0,
            }
        }
    }
    let denom = (b00 + b01) * (b01 + b11) + (b00 + b10) * (b10 + b11);
    if denom == 0.0 {
        // degenerate partitions (e.g. both a single cluster): perfect
        // agreement scores 1, anything else 0
        return Ok(if b01 + b10 == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(2.0 * (b00 * b11 - b01 * b10) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn blob(center: &[f64], count: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = derive_rng(seed, "blob", &[]);
        (0..count)
            .map(|_| {
                center
                    .iter()
                    .map(|c| c + spread * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn one_cluster_per_point_has_zero_inertia() {
        let features = vec![vec![0.0, 1.0], vec![3.0, 2.0], vec![-1.0, 5.0]];
        let (model, assignment) = kmeans_fit(&features, 3, 0, 100).unwrap();
        assert_eq!(model.inertia, 0.0);
        let mut sorted = assignment.labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn well_separated_blobs_split_perfectly() {
        let mut features = blob(&[0.0, 0.0, 0.0], 20, 0.1, 1);
        features.extend(blob(&[50.0, 0.0, 0.0], 20, 0.1, 2));
        let (_, assignment) = kmeans_fit(&features, 2, 3, 100).unwrap();
        let first = assignment.labels[0];
        assert!(assignment.labels[..20].iter().all(|&l| l == first));
        assert!(assignment.labels[20..].iter().all(|&l| l != first));
    }

    #[test]
    fn matches_exhaustive_search_on_tiny_instance() {
        // Independent oracle: enumerate every labeling of 8 points into
        // 3 clusters and take the best within-cluster sum of squares.
        let mut features = blob(&[0.0, 0.0], 3, 0.5, 4);
        features.extend(blob(&[6.0, 0.0], 3, 0.5, 5));
        features.extend(blob(&[0.0, 6.0], 2, 0.5, 6));
        let n = features.len();
        let dim = 2;
        let mut best = f64::INFINITY;
        let mut labels = vec![0usize; n];
        loop {
            let mut sums = vec![vec![0.0; dim]; 3];
            let mut counts = [0usize; 3];
            for (l, f) in labels.iter().zip(&features) {
                counts[*l] += 1;
                for (s, x) in sums[*l].iter_mut().zip(f) {
                    *s += x;
                }
            }
            if counts.iter().all(|&c| c > 0) {
                let mut wcss = 0.0;
                for (l, f) in labels.iter().zip(&features) {
                    wcss += f
                        .iter()
                        .zip(&sums[*l])
                        .map(|(x, s)| (x - s / counts[*l] as f64).powi(2))
                        .sum::<f64>();
                }
                best = best.min(wcss);
            }
            // next labeling in base-3
            let mut k = 0;
            while k < n {
                labels[k] += 1;
                if labels[k] < 3 {
                    break;
                }
                labels[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        let (model, _) = kmeans_fit(&features, 3, 7, 200).unwrap();
        assert!(
            (model.inertia - best).abs() <= 1e-9 * best.max(1.0),
            "inertia {} vs exhaustive best {best}",
            model.inertia
        );
    }

    #[test]
    fn inertia_never_increases_within_a_run() {
        let mut features = blob(&[0.0; 4], 30, 2.0, 8);
        features.extend(blob(&[3.0; 4], 30, 2.0, 9));
        let mut rng = derive_rng(10, "kmeans", &[0]);
        let init = seed_centroids(&features, 4, &mut rng);
        let run = lloyd_run(&features, init, 200);
        for pair in run.inertia_trace.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "inertia rose: {:?}",
                run.inertia_trace
            );
        }
        assert!(run.converged);
    }

    #[test]
    fn rejects_more_clusters_than_points() {
        let features = vec![vec![0.0], vec![1.0]];
        assert!(kmeans_fit(&features, 3, 0, 10).is_err());
        assert!(kmeans_fit(&features, 0, 0, 10).is_err());
    }

    #[test]
    fn ari_identical_is_one() {
        let labels = [0usize, 0, 1, 1, 2, 2, 2];
        assert_eq!(adjusted_rand_index(&labels, &labels).unwrap(), 1.0);
    }

    #[test]
    fn ari_giant_cluster_vs_two_pairs() {
        // Hand enumeration of the 6 pairs of {a,a,b,b}: the all-in-one
        // prediction gets b11=2, b01=4, b00=b10=0, so the numerator
        // vanishes and the score is exactly 0.
        let pred = [0usize, 0, 0, 0];
        let truth = [0usize, 0, 1, 1];
        assert_eq!(adjusted_rand_index(&pred, &truth).unwrap(), 0.0);
    }

    #[test]
    fn ari_symmetric_and_label_invariant() {
        let a = [0usize, 1, 1, 2, 0, 2, 1];
        let b = [2usize, 2, 0, 1, 1, 0, 0];
        let ab = adjusted_rand_index(&a, &b).unwrap();
        let ba = adjusted_rand_index(&b, &a).unwrap();
        assert_eq!(ab, ba);
        // permute a's label names: 0->5, 1->9, 2->7
        let a_renamed: Vec<usize> = a.iter().map(|&l| [5, 9, 7][l]).collect();
        assert_eq!(adjusted_rand_index(&a_renamed, &b).unwrap(), ab);
        assert!(adjusted_rand_index(&a, &b[..3]).is_err());
    }

    #[test]
    fn ari_independent_labelings_near_zero() {
        // Monte-Carlo: mean over 50 seeds of independent labelings.
        let n = 200;
        let mut sum = 0.0;
        for seed in 0..50 {
            let mut rng = derive_rng(seed, "ari_mc", &[]);
            let classes = [0usize, 1, 2, 3];
            let pred: Vec<usize> = (0..n)
                .map(|_| *classes.choose(&mut rng).unwrap())
                .collect();
            let truth: Vec<usize> = (0..n)
                .map(|_| *classes.choose(&mut rng).unwrap())
                .collect();
            sum += adjusted_rand_index(&pred, &truth).unwrap();
        }
        let mean = sum / 50.0;
        assert!(mean.abs() <= 0.05, "mean ARI {mean} not near zero");
    }
}
