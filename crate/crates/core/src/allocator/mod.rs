//! Round-delay minimization under per-device energy budgets.
//!
//! The core solver ([`sao_allocate`]) finds per-device bandwidth and CPU
//! frequency minimizing the round delay subject to each device's energy
//! budget, the shared bandwidth cap, and frequency bounds. At an interior
//! optimum every device finishes at the same instant, exhausts its energy
//! budget, and the bandwidth cap is tight; [`kkt_residuals`] reports how
//! far a solution sits from those three equalities.
//!
//! Two baselines ([`baseline_equal_bandwidth`], [`baseline_fedl`]) and a
//! transmit-power line search ([`optimize_power`]) support the
//! comparative studies.

mod baselines;
mod power;
mod sao;
mod scalar;

pub use baselines::{baseline_equal_bandwidth, baseline_fedl, tune_lambda};
pub use power::optimize_power;
pub use sao::{sao_allocate, solve_b_from_energy};
pub use scalar::{q_function, solve_f_cubic};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net_model::{derived_constants, DeviceProfile, NetworkConfig};

/// Solver tolerances. `bandwidth_cap_hz` defaults to the total bandwidth
/// and `t_max_init_s` to 100× the delay lower bound when unset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverTolerances {
    /// Relative gap allowed between allocated and total bandwidth (ε₀).
    pub ratio_eps: f64,
    /// Bandwidth bisection accuracy in Hz (ε₁).
    pub bandwidth_eps_hz: f64,
    /// Frequency bisection accuracy in Hz (ε₂).
    pub freq_eps_hz: f64,
    /// Termination ratio for the transmit-power search (ε₃).
    pub power_ratio_eps: f64,
    /// Per-device bandwidth clip.
    pub bandwidth_cap_hz: Option<f64>,
    /// Initial upper end of the delay bracket.
    pub t_max_init_s: Option<f64>,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            ratio_eps: 1e-3,
            bandwidth_eps_hz: 1.0,
            freq_eps_hz: 1e3,
            power_ratio_eps: 1e-3,
            bandwidth_cap_hz: None,
            t_max_init_s: None,
        }
    }
}

impl SolverTolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ratio_eps", self.ratio_eps),
            ("bandwidth_eps_hz", self.bandwidth_eps_hz),
            ("freq_eps_hz", self.freq_eps_hz),
            ("power_ratio_eps", self.power_ratio_eps),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0")));
            }
        }
        if self.ratio_eps >= 1.0 {
            return Err(Error::InvalidArgument("ratio_eps must be < 1".into()));
        }
        Ok(())
    }
}

/// Which bounds fired for one device during the solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipFlags {
    pub f_min_clipped: bool,
    pub f_max_clipped: bool,
    pub b_clipped: bool,
}

impl ClipFlags {
    pub fn any(&self) -> bool {
        self.f_min_clipped || self.f_max_clipped || self.b_clipped
    }
}

/// Optimizer output: per-device bandwidth and CPU frequency (device
/// order matches the input slice), the round delay, and clip diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub bandwidth_hz: Vec<f64>,
    pub cpu_freq_hz: Vec<f64>,
    pub round_delay_s: f64,
    pub clip_flags: Vec<ClipFlags>,
    pub feasible: bool,
}

impl AllocationResult {
    pub fn any_clipped(&self) -> bool {
        self.clip_flags.iter().any(ClipFlags::any)
    }
}

/// Residuals of the three optimality equalities evaluated at a solution:
/// per-device delay slack, per-device energy slack, and the bandwidth
/// budget slack. Arrays align with device order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub delay_residuals_s: Vec<f64>,
    pub energy_residuals_j: Vec<f64>,
    pub bandwidth_residual_hz: f64,
}

/// Evaluates the optimality residuals of `result` on `devices`.
pub fn kkt_residuals(
    result: &AllocationResult,
    devices: &[DeviceProfile],
    net: &NetworkConfig,
) -> Result<KktReport> {
    if result.bandwidth_hz.len() != devices.len() || result.cpu_freq_hz.len() != devices.len() {
        return Err(Error::DimensionMismatch(format!(
            "allocation for {} devices checked against {}",
            result.bandwidth_hz.len(),
            devices.len()
        )));
    }
    let mut delay = Vec::with_capacity(devices.len());
    let mut energy = Vec::with_capacity(devices.len());
    for (i, dev) in devices.iter().enumerate() {
        let c = derived_constants(dev, net);
        let b = result.bandwidth_hz[i];
        let f = result.cpu_freq_hz[i];
        let throughput = scalar::q_function(b, c.snr_hz)?;
        delay.push(
            dev.model_size_bits / throughput + c.total_cycles / f - result.round_delay_s,
        );
        energy.push(
            c.cmp_energy_coeff * f * f + c.com_energy_rate / throughput - dev.energy_budget_j,
        );
    }
    Ok(KktReport {
        delay_residuals_s: delay,
        energy_residuals_j: energy,
        bandwidth_residual_hz: result.bandwidth_hz.iter().sum::<f64>()
            - net.total_bandwidth_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{dbm_to_watts, kb_to_bits};

    pub(crate) fn device(id: usize, gain: f64, budget_j: f64) -> DeviceProfile {
        DeviceProfile {
            id,
            cycles_per_sample: 2.0e4,
            num_samples: 500,
            f_min_hz: 0.2e9,
            f_max_hz: 2.0e9,
            transmit_power_w: dbm_to_watts(23.0),
            channel_gain: gain,
            model_size_bits: kb_to_bits(448.0),
            energy_budget_j: budget_j,
            capacitance: 2e-28,
            local_iters: 5,
        }
    }

    #[test]
    fn kkt_report_is_the_constraint_lhs() {
        // A hand-built allocation violating the energy equality by +1 mJ
        // must show exactly +1 mJ in the energy residual.
        let net = NetworkConfig::default();
        let dev = device(0, 2e-10, 0.025);
        let c = derived_constants(&dev, &net);
        let b = 6e6;
        let q = q_function(b, c.snr_hz).unwrap();
        // choose f so that energy = budget + 1 mJ
        let f = ((dev.energy_budget_j + 1e-3 - c.com_energy_rate / q) / c.cmp_energy_coeff)
            .sqrt();
        let delay = dev.model_size_bits / q + c.total_cycles / f;
        let result = AllocationResult {
            bandwidth_hz: vec![b],
            cpu_freq_hz: vec![f],
            round_delay_s: delay,
            clip_flags: vec![ClipFlags::default()],
            feasible: false,
        };
        let report = kkt_residuals(&result, &[dev], &net).unwrap();
        assert!((report.energy_residuals_j[0] - 1e-3).abs() < 1e-12);
        assert!(report.delay_residuals_s[0].abs() < 1e-12);
        assert!((report.bandwidth_residual_hz - (b - net.total_bandwidth_hz)).abs() < 1e-6);
    }
}
