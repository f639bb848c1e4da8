//! Comparison baselines for the spectrum allocator.
//!
//! Baseline 1 splits the band equally and lets each device run as fast
//! as its budget allows. Baseline 2 minimizes `E + λ·T` (total energy
//! plus weighted round delay) under the bandwidth budget and frequency
//! bounds only — no per-device energy caps — and [`tune_lambda`] picks
//! the largest weight whose solution still respects every cap.

use crate::error::{Error, Result};
use crate::net_model::{derived_constants, DerivedConstants, DeviceProfile, NetworkConfig};

use super::scalar::{illinois_root, q_derivative, q_inverse, q_raw};
use super::{AllocationResult, ClipFlags};

const BW_EPS_HZ: f64 = 1.0;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Equal bandwidth for every device; each then runs at the fastest
/// in-bounds frequency whose compute energy fits what the budget leaves
/// after transmission.
pub fn baseline_equal_bandwidth(
    devices: &[DeviceProfile],
    net: &NetworkConfig,
) -> Result<AllocationResult> {
    if devices.is_empty() {
        return Err(Error::InvalidArgument("empty device set".into()));
    }
    let share = net.total_bandwidth_hz / devices.len() as f64;
    let mut bandwidth = Vec::with_capacity(devices.len());
    let mut freq = Vec::with_capacity(devices.len());
    let mut flags = Vec::with_capacity(devices.len());
    let mut delay: f64 = 0.0;
    for dev in devices {
        let c = derived_constants(dev, net);
        let throughput = q_raw(share, c.snr_hz);
        let remaining = dev.energy_budget_j - c.com_energy_rate / throughput;
        if remaining < c.cmp_energy_coeff * dev.f_min_hz * dev.f_min_hz {
            return Err(Error::Infeasible(format!(
                "per-device energy budget: device {} cannot run at f_min on an \
                 equal bandwidth share of {share:.0} Hz",
                dev.id
            )));
        }
        let f_raw = (remaining / c.cmp_energy_coeff).sqrt();
        let f = f_raw.min(dev.f_max_hz);
        flags.push(ClipFlags {
            f_min_clipped: false,
            f_max_clipped: f_raw > dev.f_max_hz,
            b_clipped: false,
        });
        delay = delay.max(dev.model_size_bits / throughput + c.total_cycles / f);
        bandwidth.push(share);
        freq.push(f);
    }
    Ok(AllocationResult {
        bandwidth_hz: bandwidth,
        cpu_freq_hz: freq,
        round_delay_s: delay,
        clip_flags: flags,
        feasible: true,
    })
}

struct FedlDevice {
    constants: DerivedConstants,
    model_size_bits: f64,
    f_min_hz: f64,
    f_max_hz: f64,
}

impl FedlDevice {
    /// Least bandwidth that lets the device finish within `delay_s` at
    /// f_max. `None` when no bandwidth up to the full band suffices.
    fn min_bandwidth(&self, delay_s: f64, total_bw: f64) -> Option<f64> {
        let comm_budget = delay_s - self.constants.total_cycles / self.f_max_hz;
        if comm_budget <= 0.0 {
            return None;
        }
        q_inverse(
            self.model_size_bits / comm_budget,
            self.constants.snr_hz,
            total_bw,
            BW_EPS_HZ,
        )
    }

    /// Cheapest frequency meeting the delay cap at bandwidth `b`.
    fn freq_for(&self, b: f64, delay_s: f64) -> f64 {
        let comm = self.model_size_bits / q_raw(b, self.constants.snr_hz);
        let needed = self.constants.total_cycles / (delay_s - comm);
        needed.clamp(self.f_min_hz, self.f_max_hz)
    }

    /// Device energy at bandwidth `b` under the delay cap.
    fn energy(&self, b: f64, delay_s: f64) -> f64 {
        let f = self.freq_for(b, delay_s);
        self.constants.cmp_energy_coeff * f * f
            + self.constants.com_energy_rate / q_raw(b, self.constants.snr_hz)
    }

    /// d(energy)/d(bandwidth) under the delay cap; strictly negative.
    fn energy_slope(&self, b: f64, delay_s: f64) -> f64 {
        let snr = self.constants.snr_hz;
        let q = q_raw(b, snr);
        let qp = q_derivative(b, snr);
        let comm_slope = -self.model_size_bits * qp / (q * q);
        let comm = self.model_size_bits / q;
        let f_req = self.constants.total_cycles / (delay_s - comm);
        let transmit_slope = -self.constants.com_energy_rate * qp / (q * q);
        if f_req > self.f_min_hz {
            let df_db = f_req / (delay_s - comm) * comm_slope;
            2.0 * self.constants.cmp_energy_coeff * f_req.min(self.f_max_hz) * df_db
                + transmit_slope
        } else {
            transmit_slope
        }
    }
}

/// Cheap feasibility probe: do the per-device bandwidth floors at this
/// delay cap fit in the band?
fn fedl_feasible_at(devs: &[FedlDevice], delay_s: f64, total_bw: f64) -> bool {
    let mut sum = 0.0;
    for d in devs {
        match d.min_bandwidth(delay_s, total_bw) {
            Some(b) => sum += b,
            None => return false,
        }
    }
    sum <= total_bw
}

/// Minimum total energy over the bandwidth split at delay cap `delay_s`:
/// each device needs at least its `min_bandwidth`; the slack is spread by
/// equalizing marginal energy via a water-filling multiplier.
fn fedl_split_at(
    devs: &[FedlDevice],
    delay_s: f64,
    total_bw: f64,
) -> Option<(Vec<f64>, f64)> {
    let floors: Option<Vec<f64>> = devs
        .iter()
        .map(|d| d.min_bandwidth(delay_s, total_bw))
        .collect();
    let floors = floors?;
    let floor_sum: f64 = floors.iter().sum();
    if floor_sum > total_bw {
        return None;
    }
    let mut split = if total_bw - floor_sum <= 1e-9 * total_bw {
        floors.clone()
    } else {
        let slope_floor: Vec<f64> = devs
            .iter()
            .zip(&floors)
            .map(|(d, lb)| d.energy_slope(*lb, delay_s))
            .collect();
        let level_hi = slope_floor
            .iter()
            .fold(f64::MIN_POSITIVE, |m, s| m.max(-s));
        let bw_at = |level: f64, out: &mut Vec<f64>| -> f64 {
            out.clear();
            for ((dev, lb), s_lb) in devs.iter().zip(&floors).zip(&slope_floor) {
                let b = if s_lb + level >= 0.0 {
                    *lb
                } else {
                    let s_hi = dev.energy_slope(total_bw, delay_s) + level;
                    if s_hi <= 0.0 {
                        total_bw
                    } else {
                        illinois_root(
                            |b| dev.energy_slope(b, delay_s) + level,
                            *lb,
                            total_bw,
                            s_lb + level,
                            s_hi,
                            BW_EPS_HZ,
                            48,
                        )
                    }
                };
                out.push(b);
            }
            out.iter().sum()
        };
        let mut split = Vec::with_capacity(devs.len());
        // total demand falls from S·B at level 0 to the floor sum at
        // level_hi; find the level where it crosses the band
        let h_lo = bw_at(0.0, &mut split) - total_bw;
        if h_lo <= 0.0 {
            // every device already capped at the full band (S = 1)
        } else {
            let h_hi = bw_at(level_hi, &mut split) - total_bw;
            let level = illinois_root(
                |level| bw_at(level, &mut split) - total_bw,
                0.0,
                level_hi,
                h_lo,
                h_hi,
                1e-12 * level_hi,
                48,
            );
            bw_at(level, &mut split);
        }
        // close the residual exactly: adding is always safe, removal
        // comes out of the slack above the floors
        let residual = total_bw - split.iter().sum::<f64>();
        if residual > 0.0 {
            let sum: f64 = split.iter().sum();
            for b in &mut split {
                *b += residual * *b / sum;
            }
        } else if residual < 0.0 {
            let slack: f64 = split.iter().zip(&floors).map(|(b, lb)| b - lb).sum();
            if slack >= -residual {
                for (b, lb) in split.iter_mut().zip(&floors) {
                    *b += residual * (*b - lb) / slack;
                }
            }
        }
        split
    };
    for (b, lb) in split.iter_mut().zip(&floors) {
        *b = b.max(*lb).min(total_bw);
    }
    let energy = devs
        .iter()
        .zip(&split)
        .map(|(d, b)| d.energy(*b, delay_s))
        .sum();
    Some((split, energy))
}

/// Minimizes `E + λ·T` subject to the bandwidth budget and frequency
/// bounds (per-device energy caps are deliberately ignored).
///
/// Parametrized on the delay cap: the energy-minimal bandwidth split at
/// a given cap is a water-filling step and the cheapest frequencies
/// follow from it, so a scalar golden-section over the cap solves the
/// whole problem (the capped energy is convex in the cap).
pub fn baseline_fedl(
    devices: &[DeviceProfile],
    net: &NetworkConfig,
    lambda: f64,
) -> Result<AllocationResult> {
    if devices.is_empty() {
        return Err(Error::InvalidArgument("empty device set".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "importance weight must be > 0, got {lambda}"
        )));
    }
    let total_bw = net.total_bandwidth_hz;
    let devs: Vec<FedlDevice> = devices
        .iter()
        .map(|d| FedlDevice {
            constants: derived_constants(d, net),
            model_size_bits: d.model_size_bits,
            f_min_hz: d.f_min_hz,
            f_max_hz: d.f_max_hz,
        })
        .collect();

    // Feasibility floor on the delay cap, then bisect down to the least
    // cap the band supports (every device at f_max, floors summing to B).
    let t_floor = devs
        .iter()
        .map(|d| {
            std::f64::consts::LN_2 * d.model_size_bits / d.constants.snr_hz
                + d.constants.total_cycles / d.f_max_hz
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let mut hi = t_floor * 2.0;
    let mut expansions = 0;
    while !fedl_feasible_at(&devs, hi, total_bw) {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NoConvergence {
                iterations: expansions,
                detail: format!(
                    "no feasible delay cap up to {hi:.3e} s for the joint objective"
                ),
            });
        }
    }
    let mut lo = t_floor;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fedl_feasible_at(&devs, mid, total_bw) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t_feasible = hi;

    // Upper end: every device at f_min on an equal share; past this the
    // objective only grows.
    let t_relaxed = devs
        .iter()
        .map(|d| {
            d.model_size_bits / q_raw(total_bw / devs.len() as f64, d.constants.snr_hz)
                + d.constants.total_cycles / d.f_min_hz
        })
        .fold(t_feasible * (1.0 + 1e-6), f64::max);

    let objective = |t: f64| -> f64 {
        match fedl_split_at(&devs, t, total_bw) {
            Some((_, energy)) => energy + lambda * t,
            None => f64::INFINITY,
        }
    };
    let mut a = t_feasible;
    let mut b = t_relaxed;
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    for _ in 0..48 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = objective(x2);
        }
        if (b - a) <= 1e-9 * b {
            break;
        }
    }
    let t_star = if f1 <= f2 { x1 } else { x2 };
    let (split, _) = fedl_split_at(&devs, t_star, total_bw)
        .ok_or_else(|| Error::NoConvergence {
            iterations: 60,
            detail: format!("delay cap {t_star} lost feasibility at the optimum"),
        })?;

    let mut freq = Vec::with_capacity(devs.len());
    let mut flags = Vec::with_capacity(devs.len());
    let mut delay: f64 = 0.0;
    let mut feasible = true;
    for ((dev, fd), b) in devices.iter().zip(&devs).zip(&split) {
        let f = fd.freq_for(*b, t_star);
        let comm = fd.model_size_bits / q_raw(*b, fd.constants.snr_hz);
        delay = delay.max(comm + fd.constants.total_cycles / f);
        let energy =
            fd.constants.cmp_energy_coeff * f * f + fd.constants.com_energy_rate / q_raw(*b, fd.constants.snr_hz);
        if energy > dev.energy_budget_j * (1.0 + 1e-9) {
            feasible = false;
        }
        flags.push(ClipFlags {
            f_min_clipped: fd.constants.total_cycles / (t_star - comm) < dev.f_min_hz,
            f_max_clipped: (f - dev.f_max_hz).abs() < f64::EPSILON * dev.f_max_hz,
            b_clipped: false,
        });
        freq.push(f);
    }
    Ok(AllocationResult {
        bandwidth_hz: split,
        cpu_freq_hz: freq,
        round_delay_s: delay,
        clip_flags: flags,
        feasible,
    })
}

/// Largest importance weight whose joint-objective solution still meets
/// every per-device energy budget (log-space bisection; the spent energy
/// grows with the weight).
pub fn tune_lambda(devices: &[DeviceProfile], net: &NetworkConfig) -> Result<f64> {
    const LAMBDA_LO: f64 = 1e-4;
    const LAMBDA_HI: f64 = 1e6;
    let excess = |lambda: f64| -> Result<f64> {
        let result = baseline_fedl(devices, net, lambda)?;
        let mut worst = f64::NEG_INFINITY;
        for (i, dev) in devices.iter().enumerate() {
            let cost = crate::net_model::round_cost(
                dev,
                result.bandwidth_hz[i],
                result.cpu_freq_hz[i],
                net,
            )?;
            worst = worst.max(cost.total_energy_j() - dev.energy_budget_j);
        }
        Ok(worst)
    };
    if excess(LAMBDA_HI)? <= 0.0 {
        return Ok(LAMBDA_HI);
    }
    if excess(LAMBDA_LO)? > 0.0 {
        return Err(Error::Infeasible(format!(
            "per-device energy budget: even weight {LAMBDA_LO} overruns some budget"
        )));
    }
    let mut lo = LAMBDA_LO;
    let mut hi = LAMBDA_HI;
    for _ in 0..28 {
        let mid = (lo * hi).sqrt();
        if excess(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
