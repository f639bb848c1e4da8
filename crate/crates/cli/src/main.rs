//! `fedcell` — drive the simulator from the command line.
//!
//! Exit codes: 0 on success, 2 when an allocation problem is
//! infeasible, 3 when a training run stops at the round cap without
//! reaching the target accuracy, 1 for any other error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fedcell_core::allocator::{kkt_residuals, sao_allocate, AllocationResult, SolverTolerances};
use fedcell_core::clustering::{adjusted_rand_index, kmeans_fit};
use fedcell_core::datasets::PartitionManifest;
use fedcell_core::fl_engine::{load_checkpoint, save_checkpoint, Checkpoint};
use fedcell_core::harness::{
    allocator_sweep_csv, num_selected_sweep_csv, run_experiment, sweep_allocator_instance,
    sweep_num_selected, ExperimentConfig, SweepParam,
};
use fedcell_core::net_model::InstanceFile;

#[derive(Parser)]
#[command(name = "fedcell", version, about = "Federated learning over a wireless cell, on your desk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one spectrum allocation instance and report the
    /// optimality residuals.
    Allocate(AllocateArgs),
    /// Evaluate the optimality residuals of an existing allocation.
    KktCheck(KktCheckArgs),
    /// Sweep a parameter: one-round allocator comparisons for
    /// power/energy/bandwidth, full experiments for num_selected.
    Sweep(SweepArgs),
    /// Run a full federated experiment from a config file.
    Train(TrainArgs),
    /// Cluster per-device model checkpoints by a layer slice.
    Cluster(ClusterArgs),
}

#[derive(Args)]
struct AllocateArgs {
    /// Instance JSON (network + devices).
    #[arg(long)]
    instance: PathBuf,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bandwidth-ratio tolerance of the outer bisection.
    #[arg(long)]
    eps0: Option<f64>,
    /// Bandwidth bisection accuracy in Hz.
    #[arg(long)]
    eps1: Option<f64>,
    /// Frequency bisection accuracy in Hz.
    #[arg(long)]
    eps2: Option<f64>,
    /// Per-device bandwidth cap in Hz (defaults to the total band).
    #[arg(long)]
    bmax: Option<f64>,
}

#[derive(Args)]
struct KktCheckArgs {
    /// Instance JSON (network + devices).
    #[arg(long)]
    instance: PathBuf,
    /// Allocation JSON, as emitted by `allocate`.
    #[arg(long)]
    allocation: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Swept parameter: power | energy | bandwidth | num_selected.
    #[arg(long)]
    param: String,
    /// Instance JSON for allocator-mode sweeps.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Experiment config for generated populations or num_selected mode.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Explicit comma-separated values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Range start (with --to and --steps).
    #[arg(long)]
    from: Option<f64>,
    /// Range end, inclusive.
    #[arg(long)]
    to: Option<f64>,
    /// Number of points in the range.
    #[arg(long)]
    steps: Option<usize>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (metrics.csv, selections.csv, model.flwt,
    /// manifest.json, summary.json).
    #[arg(long)]
    out: PathBuf,
    /// Also write every device's round-0 model under device_models/.
    #[arg(long)]
    dump_device_models: bool,
}

#[derive(Args)]
struct ClusterArgs {
    /// Directory of per-device checkpoints (*.flwt, sorted by name).
    #[arg(long)]
    checkpoints: PathBuf,
    /// Partition manifest JSON carrying the ground-truth majorities.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Cluster count.
    #[arg(long)]
    clusters: usize,
    /// Layer slice to cluster on.
    #[arg(long, default_value = "fc_last")]
    layer: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON result path (stdout when omitted).
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Optional per-layer (train_time, ari) comparison CSV.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {what} from {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {}", path.display()))
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn tolerances_from(args: &AllocateArgs) -> SolverTolerances {
    let mut tol = SolverTolerances::default();
    if let Some(v) = args.eps0 {
        tol.ratio_eps = v;
    }
    if let Some(v) = args.eps1 {
        tol.bandwidth_eps_hz = v;
    }
    if let Some(v) = args.eps2 {
        tol.freq_eps_hz = v;
    }
    tol.bandwidth_cap_hz = args.bmax;
    tol
}

fn cmd_allocate(args: &AllocateArgs) -> Result<()> {
    let instance: InstanceFile = read_json(&args.instance, "instance")?;
    let (net, devices) = instance.build()?;
    let tol = tolerances_from(args);
    let allocation = sao_allocate(&devices, &net, &tol)?;
    let kkt = kkt_residuals(&allocation, &devices, &net)?;
    let payload = serde_json::json!({ "allocation": allocation, "kkt": kkt });
    emit(&args.out, &format!("{}\n", serde_json::to_string_pretty(&payload)?))
}

fn cmd_kkt_check(args: &KktCheckArgs) -> Result<()> {
    let instance: InstanceFile = read_json(&args.instance, "instance")?;
    let (net, devices) = instance.build()?;
    let allocation: AllocationResult = read_json(&args.allocation, "allocation")?;
    let kkt = kkt_residuals(&allocation, &devices, &net)?;
    println!("{}", serde_json::to_string_pretty(&kkt)?);
    Ok(())
}

fn sweep_values(args: &SweepArgs) -> Result<Vec<f64>> {
    if let Some(values) = &args.values {
        return Ok(values.clone());
    }
    match (args.from, args.to, args.steps) {
        (Some(from), Some(to), Some(steps)) if steps >= 1 => Ok((0..steps)
            .map(|i| {
                if steps == 1 {
                    from
                } else {
                    from + (to - from) * i as f64 / (steps - 1) as f64
                }
            })
            .collect()),
        _ => bail!("provide either --values or --from/--to/--steps"),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let param = SweepParam::parse(&args.param)?;
    let values = sweep_values(args)?;
    let csv = match param {
        SweepParam::NumSelected => {
            let config_path = args
                .config
                .as_ref()
                .context("num_selected sweeps need --config")?;
            let cfg: ExperimentConfig = read_json(config_path, "experiment config")?;
            let sizes: Vec<usize> = values.iter().map(|&v| v as usize).collect();
            num_selected_sweep_csv(&sweep_num_selected(&cfg, &sizes)?)
        }
        _ => {
            let (net, devices, tol) = if let Some(instance_path) = &args.instance {
                let instance: InstanceFile = read_json(instance_path, "instance")?;
                let (net, devices) = instance.build()?;
                (net, devices, SolverTolerances::default())
            } else if let Some(config_path) = &args.config {
                let cfg: ExperimentConfig = read_json(config_path, "experiment config")?;
                let rows = fedcell_core::harness::sweep_allocator(&cfg, param, &values)?;
                emit(&args.out, &allocator_sweep_csv(&rows))?;
                return Ok(());
            } else {
                bail!("allocator sweeps need --instance or --config");
            };
            allocator_sweep_csv(&sweep_allocator_instance(
                &devices, &net, &tol, param, &values,
            )?)
        }
    };
    emit(&args.out, &csv)
}

fn cmd_train(args: &TrainArgs) -> Result<bool> {
    let mut cfg: ExperimentConfig = read_json(&args.config, "experiment config")?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    fs::create_dir_all(&args.out)?;

    // The manifest and per-device models come from the initialization
    // round; run it separately when they were requested.
    let manifest: PartitionManifest = {
        let (state, _) = fedcell_core::harness::init_experiment(&cfg)?;
        if args.dump_device_models {
            let dir = args.out.join("device_models");
            fs::create_dir_all(&dir)?;
            for (i, w) in state.local_weights.iter().enumerate() {
                save_checkpoint(
                    dir.join(format!("device_{i:04}.flwt")),
                    &Checkpoint::for_mlp(&state.layer_spec, w.clone()),
                )?;
            }
        }
        state.partition.manifest()
    };

    let result = run_experiment(&cfg)?;
    fs::write(args.out.join("metrics.csv"), result.metrics_csv())?;
    fs::write(args.out.join("selections.csv"), result.selections_csv())?;
    fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    if let Some(checkpoint) = &result.checkpoint {
        save_checkpoint(args.out.join("model.flwt"), checkpoint)?;
    }
    let summary = serde_json::json!({
        "rounds_executed": result.rounds_executed,
        "converged": result.converged,
        "final_accuracy": result.final_accuracy,
        "total_delay_s": result.total_delay_s,
        "total_energy_j": result.total_energy_j,
        "cluster_ari": result.cluster_ari,
        "cluster_labels": result.cluster_labels,
        "seed": cfg.seed,
    });
    fs::write(
        args.out.join("summary.json"),
        format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )?;
    println!(
        "rounds={} converged={} final_accuracy={:.4} T={:.4}s E={:.4}J -> {}",
        result.rounds_executed,
        result.converged,
        result.final_accuracy,
        result.total_delay_s,
        result.total_energy_j,
        args.out.display()
    );
    Ok(result.converged)
}

fn cmd_cluster(args: &ClusterArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.checkpoints)
        .with_context(|| format!("listing {}", args.checkpoints.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "flwt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .flwt checkpoints in {}", args.checkpoints.display());
    }
    let weights: Vec<_> = paths
        .iter()
        .map(|p| load_checkpoint(p).map(|c| c.weights))
        .collect::<fedcell_core::Result<_>>()?;
    let truth: Option<Vec<usize>> = match &args.manifest {
        Some(path) => {
            let manifest: PartitionManifest = read_json(path, "partition manifest")?;
            Some(manifest.devices.iter().map(|d| d.majority_class).collect())
        }
        None => None,
    };

    let slices_for = |layer: &str| -> fedcell_core::Result<Vec<Vec<f64>>> {
        weights
            .iter()
            .map(|w| w.layer_slice(layer).map(<[f64]>::to_vec))
            .collect()
    };
    let features = slices_for(&args.layer)?;
    let (model, assignment) = kmeans_fit(&features, args.clusters, args.seed, 300)?;
    let ari = match &truth {
        Some(t) => Some(adjusted_rand_index(&assignment.labels, t)?),
        None => None,
    };
    let payload = serde_json::json!({
        "labels": assignment.labels,
        "ari_vs_manifest": ari,
        "inertia": model.inertia,
        "feature_layer": args.layer,
    });
    emit(
        &args.out_json,
        &format!("{}\n", serde_json::to_string_pretty(&payload)?),
    )?;

    if let Some(csv_path) = &args.out_csv {
        let mut csv = String::from("# fedcell-cluster-layers v1\nlayer,train_time_s,ari,inertia\n");
        for range in weights[0].layer_map().to_vec() {
            let features = slices_for(&range.name)?;
            let start = Instant::now();
            let (model, assignment) = kmeans_fit(&features, args.clusters, args.seed, 300)?;
            let elapsed = start.elapsed().as_secs_f64();
            let ari = match &truth {
                Some(t) => adjusted_rand_index(&assignment.labels, t)?.to_string(),
                None => String::new(),
            };
            csv.push_str(&format!(
                "{},{},{},{}\n",
                range.name, elapsed, ari, model.inertia
            ));
        }
        emit(&Some(csv_path.clone()), &csv)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Allocate(args) => cmd_allocate(args).map(|()| true),
        Command::KktCheck(args) => cmd_kkt_check(args).map(|()| true),
        Command::Sweep(args) => cmd_sweep(args).map(|()| true),
        Command::Train(args) => cmd_train(args),
        Command::Cluster(args) => cmd_cluster(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        // a train run that stopped at the round cap without the target
        Ok(false) => ExitCode::from(3),
        Err(err) => {
            eprintln!("error: {err:#}");
            let infeasible = err
                .downcast_ref::<fedcell_core::Error>()
                .is_some_and(|e| matches!(e, fedcell_core::Error::Infeasible(_)));
            if infeasible {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
