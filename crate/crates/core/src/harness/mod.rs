//! Experiment orchestration: cluster → select → allocate → train →
//! aggregate, with deterministic seeding and CSV metrics.
//!
//! Round 0 is the initialization round: every device trains once from
//! the common init, the server clusters the uploads by one layer slice,
//! and aggregation produces the first global model. Its cost is reported
//! separately and excluded from the totals unless
//! `include_round0_cost` is set. Rounds 1..K then follow the configured
//! selection strategy until the target accuracy or the round cap.

mod sweep;

pub use sweep::{
    allocator_sweep_csv, num_selected_sweep_csv, sweep_allocator, sweep_allocator_instance,
    sweep_num_selected, AllocatorSweepRow, NumSelectedSweepRow, SweepParam,
};

use serde::{Deserialize, Serialize};

use crate::allocator::{sao_allocate, AllocationResult, SolverTolerances};
use crate::clustering::{adjusted_rand_index, cluster_devices};
use crate::datasets::{
    gen_synthetic, partition_noniid, partition_two_class, LabeledDataset, PartitionedData,
};
use crate::error::{Error, Result};
use crate::fl_engine::{
    aggregate, evaluate, init_model, local_update, Checkpoint, LayerSpec, ModelWeights,
    TrainConfig,
};
use crate::net_model::{
    generate_cell, round_aggregate, round_cost, sample_channel_gain, DeviceProfile,
    NetworkConfig, NetworkConfigFile,
};
use crate::rng::{derive_rng, derive_seed};
use crate::units::{dbm_to_watts, kb_to_bits};

/// Device population generation parameters (cost-model side).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceGenConfig {
    pub count: usize,
    pub cycles_per_sample_range: (f64, f64),
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub transmit_power_dbm: f64,
    pub model_size_kb: f64,
    pub energy_budget_j_range: (f64, f64),
    pub capacitance: f64,
}

/// Synthetic dataset and partition parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub num_classes: usize,
    pub per_class: usize,
    pub eval_per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub partition: PartitionMode,
}

/// Label-skew mode: a bias in `[0, 1]` or the two-class 80/20 variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PartitionMode {
    Sigma { value: f64 },
    TwoClass,
}

/// Classifier shape; input and output widths come from the data config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dims: Vec<usize>,
}

/// Which devices participate each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SelectionConfig {
    /// Uniform sample of `total` devices.
    Random { total: usize },
    /// `per_cluster` uniform picks from every cluster.
    ClusterRandom { per_cluster: usize },
    /// The `per_cluster` largest weight divergences from every cluster.
    WeightDivergence { per_cluster: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfigFile,
    pub devices: DeviceGenConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub selection: SelectionConfig,
    #[serde(default)]
    pub tolerances: SolverTolerances,
    /// Cluster count; defaults to the class count.
    #[serde(default)]
    pub clusters: Option<usize>,
    #[serde(default = "default_feature_layer")]
    pub feature_layer: String,
    pub target_accuracy: f64,
    pub max_rounds: usize,
    pub seed: u64,
    #[serde(default)]
    pub include_round0_cost: bool,
}

fn default_feature_layer() -> String {
    "fc_last".into()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_accuracy > 0.0 && self.target_accuracy <= 1.0) {
            return Err(Error::InvalidArgument(
                "target_accuracy must lie in (0, 1]".into(),
            ));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidArgument("max_rounds must be >= 1".into()));
        }
        if self.devices.count == 0 {
            return Err(Error::InvalidArgument("need at least one device".into()));
        }
        self.train.validate()?;
        self.tolerances.validate()?;
        if let PartitionMode::Sigma { value } = self.data.partition {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidArgument(format!(
                    "partition bias {value} outside [0, 1]"
                )));
            }
        }
        match self.selection {
            SelectionConfig::Random { total } => {
                if total == 0 || total > self.devices.count {
                    return Err(Error::InvalidArgument(format!(
                        "cannot select {total} of {} devices",
                        self.devices.count
                    )));
                }
            }
            SelectionConfig::ClusterRandom { per_cluster }
            | SelectionConfig::WeightDivergence { per_cluster } => {
                if per_cluster == 0 {
                    return Err(Error::InvalidArgument(
                        "per_cluster selection size must be >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.unwrap_or(self.data.num_classes)
    }
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub delay_s: f64,
    pub energy_j: f64,
    pub accuracy: f64,
    pub selected: Vec<usize>,
    pub flags: Vec<String>,
}

/// Mutable experiment state between rounds.
pub struct ExperimentState {
    pub net: NetworkConfig,
    pub profiles: Vec<DeviceProfile>,
    pub layer_spec: LayerSpec,
    pub partition: PartitionedData,
    pub eval_set: LabeledDataset,
    pub clusters: Vec<Vec<usize>>,
    pub cluster_labels: Vec<usize>,
    pub cluster_ari: f64,
    pub local_weights: Vec<ModelWeights>,
    pub global_weights: ModelWeights,
    cfg: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub round0: RoundMetrics,
    pub rounds: Vec<RoundMetrics>,
    /// Sum of per-round delays over the counted rounds.
    pub total_delay_s: f64,
    /// Sum of per-round energies over the counted rounds.
    pub total_energy_j: f64,
    /// Number of selection rounds executed (round 0 not counted).
    pub rounds_executed: usize,
    pub converged: bool,
    pub final_accuracy: f64,
    pub cluster_labels: Vec<usize>,
    pub majority_classes: Vec<usize>,
    pub cluster_ari: f64,
    #[serde(skip)]
    pub checkpoint: Option<Checkpoint>,
}

/// Training and held-out evaluation sets drawn from the same class
/// blobs: one class-major pool is generated, then split per class.
pub fn gen_train_eval(data: &DataConfig, seed: u64) -> (LabeledDataset, LabeledDataset) {
    let per_class_total = data.per_class + data.eval_per_class;
    let pool = gen_synthetic(
        data.num_classes,
        per_class_total,
        data.dim,
        data.separation,
        derive_seed(seed, "data", &[]),
    );
    let mut train_idx = Vec::with_capacity(data.num_classes * data.per_class);
    let mut eval_idx = Vec::with_capacity(data.num_classes * data.eval_per_class);
    for class in 0..data.num_classes {
        let base = class * per_class_total;
        train_idx.extend(base..base + data.per_class);
        eval_idx.extend(base + data.per_class..base + per_class_total);
    }
    let train = pool.subset(&train_idx).expect("indices in range");
    let eval = pool.subset(&eval_idx).expect("indices in range");
    (train, eval)
}

/// Generates the device population: positions in the disc, static
/// channel gains, and cost parameters drawn from the configured ranges.
/// `num_samples` starts at 1 and is overwritten by the partition sizes.
pub fn generate_devices(
    gen: &DeviceGenConfig,
    net: &NetworkConfig,
    seed: u64,
) -> Result<Vec<DeviceProfile>> {
    use rand::Rng;
    let distances_m = generate_cell(gen.count, net, derive_seed(seed, "placement", &[]));
    let mut profiles = Vec::with_capacity(gen.count);
    for (i, distance_m) in distances_m.iter().enumerate() {
        let gain = sample_channel_gain(
            distance_m / 1000.0,
            net,
            derive_seed(seed, "gain", &[i as u64]),
        )?;
        let mut rng = derive_rng(seed, "device_params", &[i as u64]);
        let (c_lo, c_hi) = gen.cycles_per_sample_range;
        let (e_lo, e_hi) = gen.energy_budget_j_range;
        let profile = DeviceProfile {
            id: i,
            cycles_per_sample: rng.gen_range(c_lo..=c_hi),
            num_samples: 1,
            f_min_hz: gen.f_min_hz,
            f_max_hz: gen.f_max_hz,
            transmit_power_w: dbm_to_watts(gen.transmit_power_dbm),
            channel_gain: gain,
            model_size_bits: kb_to_bits(gen.model_size_kb),
            energy_budget_j: rng.gen_range(e_lo..=e_hi),
            capacitance: gen.capacitance,
            local_iters: 1,
        };
        profiles.push(profile);
    }
    Ok(profiles)
}

fn allocation_flags(result: &AllocationResult, ids: &[usize]) -> Vec<String> {
    let mut flags = Vec::new();
    if !result.feasible {
        flags.push("allocation_infeasible".to_string());
    }
    for (clip, &id) in result.clip_flags.iter().zip(ids) {
        if clip.f_min_clipped {
            flags.push(format!("dev{id}:f_min_clip"));
        }
        if clip.f_max_clipped {
            flags.push(format!("dev{id}:f_max_clip"));
        }
        if clip.b_clipped {
            flags.push(format!("dev{id}:b_clip"));
        }
    }
    flags
}

/// Allocates the round's spectrum for `ids` and prices it.
fn allocate_and_price(
    state: &ExperimentState,
    ids: &[usize],
    round: usize,
) -> Result<(f64, f64, Vec<String>)> {
    let selected: Vec<DeviceProfile> = ids.iter().map(|&i| state.profiles[i].clone()).collect();
    let allocation = sao_allocate(&selected, &state.net, &state.cfg.tolerances)
        .map_err(|e| Error::Infeasible(format!("round {round}: {e}")))?;
    let costs: Result<Vec<_>> = selected
        .iter()
        .enumerate()
        .map(|(j, dev)| {
            round_cost(
                dev,
                allocation.bandwidth_hz[j],
                allocation.cpu_freq_hz[j],
                &state.net,
            )
        })
        .collect();
    let (delay_s, energy_j) = round_aggregate(&costs?)?;
    Ok((delay_s, energy_j, allocation_flags(&allocation, ids)))
}

fn train_device(state: &ExperimentState, id: usize, round: usize) -> Result<ModelWeights> {
    local_update(
        &state.layer_spec,
        &state.global_weights,
        &state.partition.per_device[id],
        &state.cfg.train,
        derive_seed(state.cfg.seed, "local", &[id as u64, round as u64]),
    )
}

/// Builds the initial state: devices, data, partition, round-0 training
/// of every device, clustering on the configured layer slice, and the
/// first aggregation. Returns the state and the round-0 metrics row.
pub fn init_experiment(cfg: &ExperimentConfig) -> Result<(ExperimentState, RoundMetrics)> {
    cfg.validate()?;
    let net = cfg.network.build()?;
    let mut profiles = generate_devices(&cfg.devices, &net, cfg.seed)?;
    let (train_set, eval_set) = gen_train_eval(&cfg.data, cfg.seed);
    let partition = match cfg.data.partition {
        PartitionMode::Sigma { value } => {
            partition_noniid(&train_set, cfg.devices.count, value, cfg.seed)?
        }
        PartitionMode::TwoClass => partition_two_class(&train_set, cfg.devices.count, cfg.seed)?,
    };
    for (profile, local) in profiles.iter_mut().zip(&partition.per_device) {
        profile.num_samples = local.len();
        profile.local_iters = cfg.train.local_iters;
        profile.validate()?;
    }
    let layer_spec = LayerSpec::new(
        cfg.data.dim,
        cfg.model.hidden_dims.clone(),
        cfg.data.num_classes,
    )?;
    let global_weights = init_model(&layer_spec, derive_seed(cfg.seed, "model", &[]));

    let mut state = ExperimentState {
        net,
        profiles,
        layer_spec,
        partition,
        eval_set,
        clusters: Vec::new(),
        cluster_labels: Vec::new(),
        cluster_ari: 0.0,
        local_weights: Vec::new(),
        global_weights,
        cfg: cfg.clone(),
    };

    // Round 0: every device trains once from the common init.
    let all_ids: Vec<usize> = (0..cfg.devices.count).collect();
    let (delay_s, energy_j, flags) = allocate_and_price(&state, &all_ids, 0)?;
    state.local_weights = all_ids
        .iter()
        .map(|&id| train_device(&state, id, 0))
        .collect::<Result<_>>()?;

    let assignment = cluster_devices(
        &state.local_weights,
        &cfg.feature_layer,
        cfg.num_clusters(),
        derive_seed(cfg.seed, "cluster", &[]),
    )?;
    state.cluster_ari =
        adjusted_rand_index(&assignment.labels, &state.partition.majority_class)?;
    state.clusters = assignment.groups(cfg.num_clusters());
    state.cluster_labels = assignment.labels;

    let sizes: Vec<usize> = state.partition.per_device.iter().map(LabeledDataset::len).collect();
    state.global_weights = aggregate(&state.local_weights, &sizes)?;
    let accuracy = evaluate(&state.layer_spec, &state.global_weights, &state.eval_set)?;
    let round0 = RoundMetrics {
        round: 0,
        delay_s,
        energy_j,
        accuracy,
        selected: all_ids,
        flags,
    };
    Ok((state, round0))
}

/// Executes one selection round: pick devices, allocate spectrum, run
/// local updates from the broadcast global model, aggregate over the
/// selected set, and evaluate.
pub fn run_round(state: &mut ExperimentState, round: usize) -> Result<RoundMetrics> {
    let cfg_seed = state.cfg.seed;
    let set = match state.cfg.selection {
        SelectionConfig::Random { total } => {
            crate::selection::select_random(state.profiles.len(), total, cfg_seed, round)?
        }
        SelectionConfig::ClusterRandom { per_cluster } => {
            crate::selection::select_cluster_random(&state.clusters, per_cluster, cfg_seed, round)?
        }
        SelectionConfig::WeightDivergence { per_cluster } => {
            crate::selection::select_weight_divergence(
                &state.clusters,
                &state.local_weights,
                &state.global_weights,
                per_cluster,
                round,
            )?
        }
    };
    let ids = set.device_ids.clone();
    let (delay_s, energy_j, flags) = allocate_and_price(state, &ids, round)?;
    for &id in &ids {
        state.local_weights[id] = train_device(state, id, round)?;
    }
    let selected_weights: Vec<ModelWeights> =
        ids.iter().map(|&id| state.local_weights[id].clone()).collect();
    let sizes: Vec<usize> = ids
        .iter()
        .map(|&id| state.partition.per_device[id].len())
        .collect();
    state.global_weights = aggregate(&selected_weights, &sizes)?;
    let accuracy = evaluate(&state.layer_spec, &state.global_weights, &state.eval_set)?;
    Ok(RoundMetrics {
        round,
        delay_s,
        energy_j,
        accuracy,
        selected: ids,
        flags,
    })
}

/// Full run: init, then selection rounds until the target accuracy or
/// the round cap. Hitting the cap without the target is reported via
/// `converged: false`, not an error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let (mut state, round0) = init_experiment(cfg)?;
    let mut rounds = Vec::new();
    let mut converged = false;
    for round in 1..=cfg.max_rounds {
        let metrics = run_round(&mut state, round)?;
        let accuracy = metrics.accuracy;
        rounds.push(metrics);
        if accuracy >= cfg.target_accuracy {
            converged = true;
            break;
        }
    }
    let mut total_delay_s: f64 = rounds.iter().map(|r| r.delay_s).sum();
    let mut total_energy_j: f64 = rounds.iter().map(|r| r.energy_j).sum();
    if cfg.include_round0_cost {
        total_delay_s += round0.delay_s;
        total_energy_j += round0.energy_j;
    }
    let final_accuracy = rounds.last().map_or(round0.accuracy, |r| r.accuracy);
    Ok(ExperimentResult {
        round0,
        rounds_executed: rounds.len(),
        rounds,
        total_delay_s,
        total_energy_j,
        converged,
        final_accuracy,
        cluster_labels: state.cluster_labels.clone(),
        majority_classes: state.partition.majority_class.clone(),
        cluster_ari: state.cluster_ari,
        checkpoint: Some(Checkpoint::for_mlp(&state.layer_spec, state.global_weights)),
    })
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

impl ExperimentResult {
    /// The metrics CSV: a version comment, a header, then one row per
    /// round (round 0 first). Totals cover rounds >= 1 unless the run
    /// was configured to include round 0.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("# fedcell-metrics v1\n");
        out.push_str("round,delay_s,energy_j,accuracy,selected,flags\n");
        for row in std::iter::once(&self.round0).chain(&self.rounds) {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.round,
                row.delay_s,
                row.energy_j,
                row.accuracy,
                join_ids(&row.selected),
                row.flags.join("|")
            ));
        }
        out
    }

    /// The selection trace CSV (round, semicolon-joined device ids).
    pub fn selections_csv(&self) -> String {
        let mut out = String::from("# fedcell-selections v1\n");
        out.push_str("round,selected\n");
        for row in std::iter::once(&self.round0).chain(&self.rounds) {
            out.push_str(&format!("{},{}\n", row.round, join_ids(&row.selected)));
        }
        out
    }
}

/// Round-count improvement over the random-selection reference, in both
/// printed forms: `literal = r_eval/r_reference − 1` (negative when the
/// evaluated method needs fewer rounds) and the companion
/// `inverted = r_reference/r_eval − 1` (positive in that case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementScore {
    pub literal: f64,
    pub inverted: f64,
}

pub fn improvement_score(r_eval: f64, r_reference: f64) -> Result<ImprovementScore> {
    if r_reference == 0.0 || r_eval == 0.0 {
        return Err(Error::InvalidArgument(
            "improvement score needs non-zero round counts".into(),
        ));
    }
    Ok(ImprovementScore {
        literal: r_eval / r_reference - 1.0,
        inverted: r_reference / r_eval - 1.0,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::fl_engine::BatchSize;

    /// Small, fast, feasible benchmark used across harness tests.
    pub(crate) fn desk_config(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            network: NetworkConfigFile::default(),
            devices: DeviceGenConfig {
                count: 15,
                cycles_per_sample_range: (1.5e4, 3e4),
                f_min_hz: 0.2e9,
                f_max_hz: 2e9,
                transmit_power_dbm: 23.0,
                model_size_kb: 100.0,
                energy_budget_j_range: (0.05, 0.08),
                capacitance: 2e-28,
            },
            data: DataConfig {
                num_classes: 5,
                per_class: 150,
                eval_per_class: 40,
                dim: 8,
                separation: 4.0,
                partition: PartitionMode::Sigma { value: 0.8 },
            },
            model: ModelConfig {
                hidden_dims: vec![8],
            },
            train: TrainConfig {
                local_iters: 5,
                learning_rate: 0.1,
                batch_size: BatchSize::Full,
            },
            selection: SelectionConfig::WeightDivergence { per_cluster: 1 },
            tolerances: SolverTolerances::default(),
            clusters: None,
            feature_layer: "fc_last".into(),
            target_accuracy: 0.9,
            max_rounds: 40,
            seed,
            include_round0_cost: false,
        }
    }

    #[test]
    fn experiment_runs_and_accounts() {
        let cfg = desk_config(1);
        let result = run_experiment(&cfg).unwrap();
        assert!(result.rounds_executed >= 1);
        assert_eq!(result.rounds.len(), result.rounds_executed);
        let t: f64 = result.rounds.iter().map(|r| r.delay_s).sum();
        let e: f64 = result.rounds.iter().map(|r| r.energy_j).sum();
        assert_eq!(result.total_delay_s, t);
        assert_eq!(result.total_energy_j, e);
        for r in &result.rounds {
            assert!(r.delay_s > 0.0 && r.energy_j > 0.0);
            assert!((0.0..=1.0).contains(&r.accuracy));
            assert_eq!(r.selected.len(), 5, "one per cluster over 5 clusters");
        }
        // round 0 trains everyone
        assert_eq!(result.round0.selected.len(), 15);
    }

    #[test]
    fn immediate_target_stops_after_one_round() {
        let mut cfg = desk_config(2);
        cfg.target_accuracy = 1e-9;
        let result = run_experiment(&cfg).unwrap();
        assert_eq!(result.rounds_executed, 1);
        assert!(result.converged);
    }

    #[test]
    fn include_round0_flag_changes_totals() {
        let cfg = desk_config(3);
        let base = run_experiment(&cfg).unwrap();
        let mut with0 = cfg.clone();
        with0.include_round0_cost = true;
        let full = run_experiment(&with0).unwrap();
        assert!((full.total_delay_s - base.total_delay_s - base.round0.delay_s).abs() < 1e-12);
        assert!((full.total_energy_j - base.total_energy_j - base.round0.energy_j).abs() < 1e-12);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = desk_config(4);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.metrics_csv(), b.metrics_csv());
        assert_eq!(a.selections_csv(), b.selections_csv());
        assert_eq!(
            a.checkpoint.as_ref().unwrap().weights,
            b.checkpoint.as_ref().unwrap().weights
        );
        let c = run_experiment(&desk_config(5)).unwrap();
        assert_ne!(a.metrics_csv(), c.metrics_csv());
    }

    #[test]
    fn sao_beats_equal_split_on_each_round() {
        // Paired per-round comparison on identical selected sets.
        let cfg = desk_config(6);
        let (mut state, _) = init_experiment(&cfg).unwrap();
        for round in 1..=5 {
            let metrics = run_round(&mut state, round).unwrap();
            let selected: Vec<DeviceProfile> = metrics
                .selected
                .iter()
                .map(|&i| state.profiles[i].clone())
                .collect();
            let b1 = crate::allocator::baseline_equal_bandwidth(&selected, &state.net).unwrap();
            assert!(
                metrics.delay_s <= b1.round_delay_s + 1e-9,
                "round {round}: {} vs equal-split {}",
                metrics.delay_s,
                b1.round_delay_s
            );
        }
    }

    #[test]
    fn nonconvergence_is_flagged_not_fatal() {
        let mut cfg = desk_config(7);
        cfg.target_accuracy = 0.999999;
        cfg.max_rounds = 2;
        let result = run_experiment(&cfg).unwrap();
        assert!(!result.converged);
        assert_eq!(result.rounds_executed, 2);
    }

    #[test]
    fn improvement_score_both_forms() {
        let same = improvement_score(17.0, 17.0).unwrap();
        assert_eq!(same.literal, 0.0);
        assert_eq!(same.inverted, 0.0);
        let faster = improvement_score(50.0, 100.0).unwrap();
        assert_eq!(faster.literal, -0.5);
        assert_eq!(faster.inverted, 1.0);
        assert!(improvement_score(5.0, 0.0).is_err());
    }

    #[test]
    fn config_round_trips_json() {
        let cfg = desk_config(8);
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.selection, cfg.selection);
        assert_eq!(back.data.partition, cfg.data.partition);
    }
}
