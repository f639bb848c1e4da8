//! Wireless cell generation and the per-round computation/communication
//! cost model.
//!
//! One federated round costs each participating device compute time
//! `L·C·D / f`, compute energy `(α/2)·L·C·D·f²`, and an uplink transfer of
//! `z` bits at rate `b·log2(1 + h·p/(N0·b))`. The round delay is the
//! slowest device; the round energy is the sum. Downlink broadcast is
//! neglected.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::units::{dbm_to_watts, kb_to_bits};

/// Cell-wide radio parameters, in SI units.
///
/// Built from [`NetworkConfigFile`], which carries the on-disk schema
/// (noise in dBm/Hz); after conversion everything is W/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub total_bandwidth_hz: f64,
    pub noise_psd_w_per_hz: f64,
    pub cell_radius_m: f64,
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
    pub shadow_sigma_db: f64,
}

/// On-disk network schema (flat key-value, JSON-compatible).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfigFile {
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub cell_radius_m: f64,
    #[serde(default = "default_pathloss_intercept")]
    pub pathloss_intercept_db: f64,
    #[serde(default = "default_pathloss_slope")]
    pub pathloss_slope_db: f64,
    #[serde(default = "default_shadow_sigma")]
    pub shadow_sigma_db: f64,
}

fn default_pathloss_intercept() -> f64 {
    128.1
}
fn default_pathloss_slope() -> f64 {
    37.6
}
fn default_shadow_sigma() -> f64 {
    8.0
}

impl Default for NetworkConfigFile {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            noise_dbm_per_hz: -174.0,
            cell_radius_m: 300.0,
            pathloss_intercept_db: default_pathloss_intercept(),
            pathloss_slope_db: default_pathloss_slope(),
            shadow_sigma_db: default_shadow_sigma(),
        }
    }
}

impl NetworkConfigFile {
    /// Converts to SI units and validates.
    pub fn build(&self) -> Result<NetworkConfig> {
        let cfg = NetworkConfig {
            total_bandwidth_hz: self.bandwidth_hz,
            noise_psd_w_per_hz: dbm_to_watts(self.noise_dbm_per_hz),
            cell_radius_m: self.cell_radius_m,
            pathloss_intercept_db: self.pathloss_intercept_db,
            pathloss_slope_db: self.pathloss_slope_db,
            shadow_sigma_db: self.shadow_sigma_db,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_bandwidth_hz > 0.0) {
            return Err(Error::InvalidArgument("total bandwidth must be > 0".into()));
        }
        if !(self.noise_psd_w_per_hz > 0.0) {
            return Err(Error::InvalidArgument("noise PSD must be > 0 W/Hz".into()));
        }
        if !(self.cell_radius_m > 0.0) {
            return Err(Error::InvalidArgument("cell radius must be > 0".into()));
        }
        if self.shadow_sigma_db < 0.0 {
            return Err(Error::InvalidArgument("shadow sigma must be >= 0".into()));
        }
        Ok(())
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfigFile::default().build().expect("default network config is valid")
    }
}

/// One device's static parameters, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub id: usize,
    /// CPU cycles to process one sample (C).
    pub cycles_per_sample: f64,
    /// Local dataset size (D).
    pub num_samples: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Transmit power p, in W.
    pub transmit_power_w: f64,
    /// Linear channel gain h.
    pub channel_gain: f64,
    /// Model upload size z, in bits.
    pub model_size_bits: f64,
    /// Per-round energy budget, in J.
    pub energy_budget_j: f64,
    /// Effective switched capacitance α, in J·s²/cycle.
    pub capacitance: f64,
    /// Local gradient-descent iterations per round (L).
    pub local_iters: u32,
}

/// On-disk device schema. Power in dBm and model size in KB; converted
/// once at load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfileFile {
    pub id: usize,
    pub cycles_per_sample: f64,
    pub num_samples: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub transmit_power_dbm: f64,
    pub channel_gain: f64,
    pub model_size_kb: f64,
    pub energy_budget_j: f64,
    pub capacitance: f64,
    pub local_iters: u32,
}

impl DeviceProfileFile {
    pub fn build(&self) -> Result<DeviceProfile> {
        let dev = DeviceProfile {
            id: self.id,
            cycles_per_sample: self.cycles_per_sample,
            num_samples: self.num_samples,
            f_min_hz: self.f_min_hz,
            f_max_hz: self.f_max_hz,
            transmit_power_w: dbm_to_watts(self.transmit_power_dbm),
            channel_gain: self.channel_gain,
            model_size_bits: kb_to_bits(self.model_size_kb),
            energy_budget_j: self.energy_budget_j,
            capacitance: self.capacitance,
            local_iters: self.local_iters,
        };
        dev.validate()?;
        Ok(dev)
    }
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cycles_per_sample", self.cycles_per_sample),
            ("f_min_hz", self.f_min_hz),
            ("f_max_hz", self.f_max_hz),
            ("transmit_power_w", self.transmit_power_w),
            ("channel_gain", self.channel_gain),
            ("model_size_bits", self.model_size_bits),
            ("energy_budget_j", self.energy_budget_j),
            ("capacitance", self.capacitance),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "device {}: {name} must be positive and finite, got {value}",
                    self.id
                )));
            }
        }
        if self.f_min_hz > self.f_max_hz {
            return Err(Error::InvalidArgument(format!(
                "device {}: f_min {} exceeds f_max {}",
                self.id, self.f_min_hz, self.f_max_hz
            )));
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidArgument(format!(
                "device {}: num_samples must be >= 1",
                self.id
            )));
        }
        if self.local_iters == 0 {
            return Err(Error::InvalidArgument(format!(
                "device {}: local_iters must be >= 1",
                self.id
            )));
        }
        Ok(())
    }
}

/// On-disk allocator instance: one cell plus its devices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub network: NetworkConfigFile,
    pub devices: Vec<DeviceProfileFile>,
}

impl InstanceFile {
    pub fn build(&self) -> Result<(NetworkConfig, Vec<DeviceProfile>)> {
        let net = self.network.build()?;
        let devices = self
            .devices
            .iter()
            .map(DeviceProfileFile::build)
            .collect::<Result<Vec<_>>>()?;
        Ok((net, devices))
    }
}

/// Per-device constants the allocator works with.
///
/// `snr_hz = h·p/N0` is the received power over the noise PSD (the rate
/// at bandwidth b is `b·log2(1 + snr_hz/b)`, bounded by `snr_hz/ln 2`).
/// `total_cycles = L·C·D`, `cmp_energy_coeff = (α/2)·L·C·D` (compute
/// energy is `coeff·f²`), and `com_energy_rate = z·p` (transmit energy is
/// `rate / throughput`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub snr_hz: f64,
    pub total_cycles: f64,
    pub cmp_energy_coeff: f64,
    pub com_energy_rate: f64,
}

/// Delay and energy of one device's round, split by phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundCost {
    pub compute_time_s: f64,
    pub comm_time_s: f64,
    pub compute_energy_j: f64,
    pub comm_energy_j: f64,
}

impl RoundCost {
    pub fn total_time_s(&self) -> f64 {
        self.compute_time_s + self.comm_time_s
    }

    pub fn total_energy_j(&self) -> f64 {
        self.compute_energy_j + self.comm_energy_j
    }
}

/// Path loss in dB at `distance_km` under the cell's log-distance model.
pub fn path_loss_db(distance_km: f64, cfg: &NetworkConfig) -> Result<f64> {
    if !(distance_km > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance must be > 0 km, got {distance_km}"
        )));
    }
    Ok(cfg.pathloss_intercept_db + cfg.pathloss_slope_db * distance_km.log10())
}

/// Linear channel gain at `distance_km` with log-normal shadowing,
/// deterministic for a fixed seed. Gains are sampled once per experiment
/// and held static for the run.
pub fn sample_channel_gain(distance_km: f64, cfg: &NetworkConfig, rng_seed: u64) -> Result<f64> {
    let pl_db = path_loss_db(distance_km, cfg)?;
    let mut rng = derive_rng(rng_seed, "shadow", &[]);
    let shadow_db = if cfg.shadow_sigma_db > 0.0 {
        Normal::new(0.0, cfg.shadow_sigma_db)
            .expect("sigma validated non-negative")
            .sample(&mut rng)
    } else {
        0.0
    };
    Ok(10f64.powf(-(pl_db + shadow_db) / 10.0))
}

/// Uplink rate in bits/s on a bandwidth slice of `bandwidth_hz`.
pub fn achievable_rate(bandwidth_hz: f64, dev: &DeviceProfile, cfg: &NetworkConfig) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be > 0 Hz, got {bandwidth_hz}"
        )));
    }
    let snr = dev.channel_gain * dev.transmit_power_w
        / (cfg.noise_psd_w_per_hz * bandwidth_hz);
    Ok(bandwidth_hz * (1.0 + snr).log2())
}

/// Collapses a profile into the allocator's constants.
pub fn derived_constants(dev: &DeviceProfile, cfg: &NetworkConfig) -> DerivedConstants {
    let work = f64::from(dev.local_iters) * dev.cycles_per_sample * dev.num_samples as f64;
    DerivedConstants {
        snr_hz: dev.channel_gain * dev.transmit_power_w / cfg.noise_psd_w_per_hz,
        total_cycles: work,
        cmp_energy_coeff: 0.5 * dev.capacitance * work,
        com_energy_rate: dev.model_size_bits * dev.transmit_power_w,
    }
}

/// Cost of one round for a device at bandwidth `bandwidth_hz` and CPU
/// frequency `cpu_freq_hz`. A zero rate yields an infinite comm time.
pub fn round_cost(
    dev: &DeviceProfile,
    bandwidth_hz: f64,
    cpu_freq_hz: f64,
    cfg: &NetworkConfig,
) -> Result<RoundCost> {
    if !(cpu_freq_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cpu frequency must be > 0 Hz, got {cpu_freq_hz}"
        )));
    }
    let c = derived_constants(dev, cfg);
    let rate = achievable_rate(bandwidth_hz, dev, cfg)?;
    let comm_time_s = if rate > 0.0 {
        dev.model_size_bits / rate
    } else {
        f64::INFINITY
    };
    Ok(RoundCost {
        compute_time_s: c.total_cycles / cpu_freq_hz,
        comm_time_s,
        compute_energy_j: c.cmp_energy_coeff * cpu_freq_hz * cpu_freq_hz,
        comm_energy_j: comm_time_s * dev.transmit_power_w,
    })
}

/// Round totals: energy is the sum over devices, delay the maximum.
pub fn round_aggregate(costs: &[RoundCost]) -> Result<(f64, f64)> {
    if costs.is_empty() {
        return Err(Error::InvalidArgument(
            "round aggregate of an empty device set".into(),
        ));
    }
    let energy: f64 = costs.iter().map(RoundCost::total_energy_j).sum();
    let delay = costs
        .iter()
        .map(RoundCost::total_time_s)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((delay, energy))
}

/// Device distances from the base station in meters: uniform over the
/// disc of radius `cell_radius_m`, re-drawn under a 10 m floor to keep
/// the path loss finite.
pub fn generate_cell(count: usize, cfg: &NetworkConfig, seed: u64) -> Vec<f64> {
    const MIN_DISTANCE_M: f64 = 10.0;
    let mut rng = derive_rng(seed, "cell", &[]);
    (0..count)
        .map(|_| loop {
            let u: f64 = rng.gen();
            let d = cfg.cell_radius_m * u.sqrt();
            if d >= MIN_DISTANCE_M {
                break d;
            }
        })
        .collect()
}
