//! Binary search for the common transmit power minimizing the round
//! delay, with every candidate evaluated through the full allocator.

use crate::error::{Error, Result};
use crate::net_model::{DeviceProfile, NetworkConfig};

use super::{sao_allocate, SolverTolerances};

/// Searches `[p_min_w, p_max_w]` for the transmit power (shared by all
/// devices) that minimizes the allocator's round delay.
///
/// The interval shrinks by comparing each candidate's delay against the
/// running minimum — toward higher power while the delay keeps improving,
/// lower once it worsens — and stops when `1 − p_low/p_up` drops to
/// `power_ratio_eps`. Returns the best candidate evaluated; `p_min_w ==
/// p_max_w` returns immediately without evaluating.
pub fn optimize_power(
    devices: &[DeviceProfile],
    net: &NetworkConfig,
    p_min_w: f64,
    p_max_w: f64,
    tol: &SolverTolerances,
) -> Result<f64> {
    if !(p_min_w > 0.0) || p_min_w > p_max_w {
        return Err(Error::InvalidArgument(format!(
            "power bounds must satisfy 0 < p_min <= p_max, got [{p_min_w}, {p_max_w}]"
        )));
    }
    let delay_at = |p: f64| -> Option<f64> {
        let candidates: Vec<DeviceProfile> = devices
            .iter()
            .map(|d| {
                let mut d = d.clone();
                d.transmit_power_w = p;
                d
            })
            .collect();
        sao_allocate(&candidates, net, tol)
            .ok()
            .filter(|r| r.feasible)
            .map(|r| r.round_delay_s)
    };

    let mut p_up = p_max_w;
    let mut p_low = p_min_w;
    let mut p = p_low;
    let mut epoch = 0usize;
    let mut history_min = f64::INFINITY;
    let mut best: Option<(f64, f64)> = None;
    while 1.0 - p_low / p_up > tol.power_ratio_eps {
        let delay = delay_at(p).unwrap_or(f64::INFINITY);
        if epoch > 0 {
            if delay <= history_min {
                p_low = p;
            } else {
                p_up = p;
            }
        }
        if delay < best.map_or(f64::INFINITY, |(_, d)| d) {
            best = Some((p, delay));
        }
        history_min = history_min.min(delay);
        p = 0.5 * (p_up + p_low);
        epoch += 1;
    }
    match best {
        Some((p_star, _)) => Ok(p_star),
        None if epoch == 0 => Ok(p_min_w),
        None => Err(Error::Infeasible(
            "every candidate transmit power was infeasible".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::device;
    use super::*;
    use crate::units::dbm_to_watts;

    #[test]
    fn equal_bounds_return_without_search() {
        let net = NetworkConfig::default();
        let devs = vec![device(0, 1e-12, 1e-9)]; // would be infeasible if evaluated
        let p = optimize_power(&devs, &net, 0.1, 0.1, &SolverTolerances::default()).unwrap();
        assert_eq!(p, 0.1);
    }

    #[test]
    fn generous_budgets_drive_power_to_the_top() {
        // With loose budgets the delay strictly improves with power, so
        // the search must end near p_max.
        let net = NetworkConfig::default();
        let devs: Vec<_> = (0..4)
            .map(|i| device(i, 10f64.powf(-10.0 - 0.1 * i as f64), 5.0))
            .collect();
        let p_min = dbm_to_watts(10.0);
        let p_max = dbm_to_watts(23.0);
        let tol = SolverTolerances::default();
        let p = optimize_power(&devs, &net, p_min, p_max, &tol).unwrap();
        assert!(
            1.0 - p / p_max <= 2.0 * tol.power_ratio_eps,
            "expected p* near {p_max}, got {p}"
        );
    }
}
