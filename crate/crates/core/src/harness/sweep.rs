//! Parameter sweeps: one-round allocator comparisons (delay/energy
//! versus transmit power, energy budget, or bandwidth) and full
//! experiment sweeps over the selected-set size.

use serde::{Deserialize, Serialize};

use crate::allocator::{baseline_equal_bandwidth, baseline_fedl, sao_allocate, tune_lambda, SolverTolerances};
use crate::error::{Error, Result};
use crate::net_model::{round_aggregate, round_cost, DeviceProfile, NetworkConfig};
use crate::units::dbm_to_watts;

use super::{generate_devices, run_experiment, ExperimentConfig, SelectionConfig};

/// What an allocator-mode sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Common transmit power in dBm.
    TransmitPowerDbm,
    /// Common per-device energy budget in J.
    EnergyBudgetJ,
    /// Total bandwidth in Hz.
    BandwidthHz,
    /// Total selected devices per round (experiment mode).
    NumSelected,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "power" | "transmit_power" => Ok(Self::TransmitPowerDbm),
            "energy" | "energy_budget" => Ok(Self::EnergyBudgetJ),
            "bandwidth" => Ok(Self::BandwidthHz),
            "num_selected" | "s" => Ok(Self::NumSelected),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep parameter {other:?} (power|energy|bandwidth|num_selected)"
            ))),
        }
    }
}

/// One allocator-mode sweep row: round delay and energy of the optimizer
/// and both baselines at one parameter value. Failed points carry the
/// error in-row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocatorSweepRow {
    pub param_value: f64,
    pub t_sao_s: f64,
    pub t_b1_s: f64,
    pub t_b2_s: f64,
    pub e_sao_j: f64,
    pub e_b1_j: f64,
    pub e_b2_j: f64,
    pub error: Option<String>,
}

/// One experiment-mode sweep row over the selected-set size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumSelectedSweepRow {
    pub param_value: usize,
    pub rounds: usize,
    pub t_total_s: f64,
    pub e_total_j: f64,
    pub mean_round_delay_s: f64,
    pub final_accuracy: f64,
    pub converged: bool,
    pub error: Option<String>,
}

fn totals(devices: &[DeviceProfile], net: &NetworkConfig, b: &[f64], f: &[f64]) -> Result<(f64, f64)> {
    let costs: Result<Vec<_>> = devices
        .iter()
        .enumerate()
        .map(|(i, dev)| round_cost(dev, b[i], f[i], net))
        .collect();
    round_aggregate(&costs?)
}

fn evaluate_point(
    devices: &[DeviceProfile],
    net: &NetworkConfig,
    tolerances: &SolverTolerances,
    value: f64,
) -> AllocatorSweepRow {
    let mut row = AllocatorSweepRow {
        param_value: value,
        t_sao_s: f64::NAN,
        t_b1_s: f64::NAN,
        t_b2_s: f64::NAN,
        e_sao_j: f64::NAN,
        e_b1_j: f64::NAN,
        e_b2_j: f64::NAN,
        error: None,
    };
    let record = |r: Result<(f64, f64)>, t_slot: &mut f64, e_slot: &mut f64, err: &mut Option<String>| {
        match r {
            Ok((t, e)) => {
                *t_slot = t;
                *e_slot = e;
            }
            Err(e) => {
                if err.is_none() {
                    *err = Some(e.to_string());
                }
            }
        }
    };
    let sao = sao_allocate(devices, net, tolerances)
        .and_then(|r| totals(devices, net, &r.bandwidth_hz, &r.cpu_freq_hz));
    let (mut t, mut e, mut err) = (f64::NAN, f64::NAN, None);
    record(sao, &mut t, &mut e, &mut err);
    row.t_sao_s = t;
    row.e_sao_j = e;
    let b1 = baseline_equal_bandwidth(devices, net)
        .and_then(|r| totals(devices, net, &r.bandwidth_hz, &r.cpu_freq_hz));
    let (mut t, mut e) = (f64::NAN, f64::NAN);
    record(b1, &mut t, &mut e, &mut err);
    row.t_b1_s = t;
    row.e_b1_j = e;
    let b2 = tune_lambda(devices, net)
        .and_then(|lambda| baseline_fedl(devices, net, lambda))
        .and_then(|r| totals(devices, net, &r.bandwidth_hz, &r.cpu_freq_hz));
    let (mut t, mut e) = (f64::NAN, f64::NAN);
    record(b2, &mut t, &mut e, &mut err);
    row.t_b2_s = t;
    row.e_b2_j = e;
    row.error = err;
    row
}

/// One-round allocator comparison per parameter value on an explicit
/// device set.
pub fn sweep_allocator_instance(
    devices: &[DeviceProfile],
    net: &NetworkConfig,
    tolerances: &SolverTolerances,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<AllocatorSweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one value".into()));
    }
    if param == SweepParam::NumSelected {
        return Err(Error::InvalidArgument(
            "num_selected sweeps run full experiments; use sweep_num_selected".into(),
        ));
    }
    let rows = values
        .iter()
        .map(|&value| {
            let mut net = net.clone();
            let mut devices = devices.to_vec();
            match param {
                SweepParam::TransmitPowerDbm => {
                    for d in &mut devices {
                        d.transmit_power_w = dbm_to_watts(value);
                    }
                }
                SweepParam::EnergyBudgetJ => {
                    for d in &mut devices {
                        d.energy_budget_j = value;
                    }
                }
                SweepParam::BandwidthHz => net.total_bandwidth_hz = value,
                SweepParam::NumSelected => unreachable!("rejected above"),
            }
            evaluate_point(&devices, &net, tolerances, value)
        })
        .collect();
    Ok(rows)
}

/// One-round allocator comparison per parameter value. The device
/// population (placement, gains, budgets) comes from the experiment
/// config's seed, with the swept parameter overridden per point.
pub fn sweep_allocator(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<AllocatorSweepRow>> {
    let net = cfg.network.build()?;
    let mut devices = generate_devices(&cfg.devices, &net, cfg.seed)?;
    for d in &mut devices {
        // allocator sweeps price a fixed workload per round
        d.num_samples = cfg.data.per_class * cfg.data.num_classes / cfg.devices.count.max(1);
        d.num_samples = d.num_samples.max(1);
        d.local_iters = cfg.train.local_iters;
    }
    sweep_allocator_instance(&devices, &net, &cfg.tolerances, param, values)
}

/// Full experiment per selected-set size. For cluster-based strategies
/// the size must divide evenly into the cluster count.
pub fn sweep_num_selected(
    cfg: &ExperimentConfig,
    values: &[usize],
) -> Result<Vec<NumSelectedSweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &total in values {
        let mut point_cfg = cfg.clone();
        point_cfg.selection = match cfg.selection {
            SelectionConfig::Random { .. } => SelectionConfig::Random { total },
            SelectionConfig::ClusterRandom { .. } => {
                match per_cluster_size(total, point_cfg.num_clusters()) {
                    Ok(per_cluster) => SelectionConfig::ClusterRandom { per_cluster },
                    Err(e) => {
                        rows.push(error_row(total, e));
                        continue;
                    }
                }
            }
            SelectionConfig::WeightDivergence { .. } => {
                match per_cluster_size(total, point_cfg.num_clusters()) {
                    Ok(per_cluster) => SelectionConfig::WeightDivergence { per_cluster },
                    Err(e) => {
                        rows.push(error_row(total, e));
                        continue;
                    }
                }
            }
        };
        match run_experiment(&point_cfg) {
            Ok(result) => {
                let mean_round_delay_s = if result.rounds_executed > 0 {
                    result.rounds.iter().map(|r| r.delay_s).sum::<f64>()
                        / result.rounds_executed as f64
                } else {
                    f64::NAN
                };
                rows.push(NumSelectedSweepRow {
                    param_value: total,
                    rounds: result.rounds_executed,
                    t_total_s: result.total_delay_s,
                    e_total_j: result.total_energy_j,
                    mean_round_delay_s,
                    final_accuracy: result.final_accuracy,
                    converged: result.converged,
                    error: None,
                });
            }
            Err(e) => rows.push(error_row(total, e)),
        }
    }
    Ok(rows)
}

fn per_cluster_size(total: usize, clusters: usize) -> Result<usize> {
    if total == 0 || total % clusters != 0 {
        return Err(Error::InvalidArgument(format!(
            "selected-set size {total} does not split over {clusters} clusters"
        )));
    }
    Ok(total / clusters)
}

fn error_row(total: usize, e: Error) -> NumSelectedSweepRow {
    NumSelectedSweepRow {
        param_value: total,
        rounds: 0,
        t_total_s: f64::NAN,
        e_total_j: f64::NAN,
        mean_round_delay_s: f64::NAN,
        final_accuracy: f64::NAN,
        converged: false,
        error: Some(e.to_string()),
    }
}

fn fmt_opt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        v.to_string()
    }
}

/// CSV for allocator-mode sweeps (frozen column order).
pub fn allocator_sweep_csv(rows: &[AllocatorSweepRow]) -> String {
    let mut out = String::from("# fedcell-sweep-allocator v1\n");
    out.push_str("param_value,t_sao_s,t_b1_s,t_b2_s,e_sao_j,e_b1_j,e_b2_j,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.param_value,
            fmt_opt(r.t_sao_s),
            fmt_opt(r.t_b1_s),
            fmt_opt(r.t_b2_s),
            fmt_opt(r.e_sao_j),
            fmt_opt(r.e_b1_j),
            fmt_opt(r.e_b2_j),
            r.error.as_deref().unwrap_or("")
        ));
    }
    out
}

/// CSV for selected-set-size sweeps (frozen column order).
pub fn num_selected_sweep_csv(rows: &[NumSelectedSweepRow]) -> String {
    let mut out = String::from("# fedcell-sweep-num-selected v1\n");
    out.push_str("param_value,rounds,t_total_s,e_total_j,mean_round_delay_s,final_accuracy,converged,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.param_value,
            r.rounds,
            fmt_opt(r.t_total_s),
            fmt_opt(r.e_total_j),
            fmt_opt(r.mean_round_delay_s),
            fmt_opt(r.final_accuracy),
            r.converged,
            r.error.as_deref().unwrap_or("")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::desk_config;
    use super::*;

    #[test]
    fn single_value_gives_single_row() {
        let mut cfg = desk_config(11);
        cfg.devices.count = 6;
        let rows = sweep_allocator(&cfg, SweepParam::EnergyBudgetJ, &[0.05]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].error.is_none(), "{:?}", rows[0].error);
        assert!(rows[0].t_sao_s.is_finite());
        assert!(sweep_allocator(&cfg, SweepParam::EnergyBudgetJ, &[]).is_err());
    }

    #[test]
    fn relaxing_energy_budgets_never_hurts_delay() {
        let mut cfg = desk_config(12);
        cfg.devices.count = 6;
        let values = [0.03, 0.035, 0.04, 0.045, 0.05];
        let rows = sweep_allocator(&cfg, SweepParam::EnergyBudgetJ, &values).unwrap();
        for pair in rows.windows(2) {
            assert!(
                pair[1].t_sao_s <= pair[0].t_sao_s * (1.0 + 1e-6),
                "delay rose from {} to {} when the budget relaxed",
                pair[0].t_sao_s,
                pair[1].t_sao_s
            );
        }
        for r in &rows {
            assert!(r.t_sao_s <= r.t_b1_s + 1e-9, "optimizer above equal split");
        }
    }

    #[test]
    fn sweep_errors_stay_in_row() {
        let mut cfg = desk_config(13);
        cfg.devices.count = 6;
        // second point's budget is impossibly small
        let rows = sweep_allocator(&cfg, SweepParam::EnergyBudgetJ, &[0.05, 1e-9]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.is_some());
        assert!(rows[1].t_sao_s.is_nan());
        let csv = allocator_sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn num_selected_sweep_counts_rounds() {
        let mut cfg = desk_config(14);
        cfg.max_rounds = 6;
        cfg.target_accuracy = 0.999; // force the cap
        let rows = sweep_num_selected(&cfg, &[5, 10]).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.error.is_none(), "{:?}", r.error);
            assert_eq!(r.rounds, 6);
        }
        // 7 does not divide over 5 clusters: in-row error, sweep continues
        let rows = sweep_num_selected(&cfg, &[7, 5]).unwrap();
        assert!(rows[0].error.is_some());
        assert!(rows[1].error.is_none());
    }
}
