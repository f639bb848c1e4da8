//! Scalar numerics behind the allocator: the bandwidth-throughput
//! function, its inverse, and the cubic stationarity equation for the
//! CPU frequency.

use crate::error::{Error, Result};

/// Throughput of a bandwidth slice `x` at SNR scale `snr_hz`:
/// `Q(x) = x·log2(1 + snr/x)`. Strictly increasing in `x` with upper
/// bound `snr/ln 2`.
pub fn q_function(x_hz: f64, snr_hz: f64) -> Result<f64> {
    if !(x_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "q_function needs bandwidth > 0, got {x_hz}"
        )));
    }
    if snr_hz < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "q_function needs snr >= 0, got {snr_hz}"
        )));
    }
    Ok(q_raw(x_hz, snr_hz))
}

#[inline]
pub(crate) fn q_raw(x: f64, snr: f64) -> f64 {
    // ln_1p keeps precision when snr/x underflows toward 0
    x * (snr / x).ln_1p() / std::f64::consts::LN_2
}

/// d/dx of `q_raw`.
#[inline]
pub(crate) fn q_derivative(x: f64, snr: f64) -> f64 {
    ((snr / x).ln_1p() - snr / (x + snr)) / std::f64::consts::LN_2
}

/// Hard ceiling of `q_raw` as x → ∞.
#[inline]
pub(crate) fn q_upper_bound(snr: f64) -> f64 {
    snr / std::f64::consts::LN_2
}

/// Solves `q_raw(x, snr) = target` on (0, hi_cap] by bisection to width
/// `eps_hz`, then a few Newton steps to push the residual to machine
/// precision. Returns `None` when the target is at or above the
/// asymptotic bound or unreachable within `hi_cap`.
pub(crate) fn q_inverse(target: f64, snr: f64, hi_cap: f64, eps_hz: f64) -> Option<f64> {
    if target <= 0.0 {
        return Some(0.0);
    }
    if target >= q_upper_bound(snr) || q_raw(hi_cap, snr) < target {
        return None;
    }
    let mut lo = hi_cap * 1e-18;
    while q_raw(lo, snr) > target {
        lo *= 1e-3;
        if lo < f64::MIN_POSITIVE {
            return Some(0.0);
        }
    }
    let mut hi = hi_cap;
    while hi - lo > eps_hz.max(f64::EPSILON * hi) {
        let mid = 0.5 * (lo + hi);
        if q_raw(mid, snr) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // safeguarded Newton polish: fall back to bisection steps whenever
    // the tangent step leaves the bracket
    let mut x = 0.5 * (lo + hi);
    for _ in 0..12 {
        let fx = q_raw(x, snr) - target;
        if fx == 0.0 {
            break;
        }
        if fx < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let deriv = q_derivative(x, snr);
        if deriv <= 0.0 {
            break;
        }
        let mut next = x - fx / deriv;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if next == x {
            break;
        }
        x = next;
    }
    Some(x)
}

/// Safeguarded false-position (Illinois) root finder on a bracket with
/// opposite signs. Falls back to the midpoint when the secant step
/// leaves the bracket.
pub(crate) fn illinois_root(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    mut f_hi: f64,
    x_tol: f64,
    max_iter: usize,
) -> f64 {
    if f_lo == 0.0 {
        return lo;
    }
    if f_hi == 0.0 {
        return hi;
    }
    debug_assert!(f_lo * f_hi < 0.0, "illinois needs a sign change");
    let mut side = 0i8;
    for _ in 0..max_iter {
        if (hi - lo).abs() <= x_tol {
            break;
        }
        let mut x = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx > 0.0) == (f_lo > 0.0) {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (lo + hi)
}

/// Unique positive root of `M(f) = f³ + X·f − Y` where
/// `X = rate·T/(z·G) − budget/G` and `Y = rate·cycles/(z·G) > 0`.
///
/// `M` has exactly one positive root: for X ≥ 0 it is increasing from
/// `M(0) = −Y < 0`; for X < 0 it decreases to a minimum at
/// `sqrt(−X/3)` and increases afterwards, so the root lies above that
/// point. Bisection to `freq_eps_hz` plus a Newton polish.
pub fn solve_f_cubic(
    round_delay_s: f64,
    constants: &crate::net_model::DerivedConstants,
    energy_budget_j: f64,
    model_size_bits: f64,
    freq_eps_hz: f64,
) -> f64 {
    let g = constants.cmp_energy_coeff;
    let x_coeff = constants.com_energy_rate * round_delay_s / (model_size_bits * g)
        - energy_budget_j / g;
    let y_coeff =
        constants.com_energy_rate * constants.total_cycles / (model_size_bits * g);
    cubic_root(x_coeff, y_coeff, freq_eps_hz)
}

/// Root of `f³ + x·f − y = 0`, `y > 0`, on (0, ∞).
pub(crate) fn cubic_root(x: f64, y: f64, eps: f64) -> f64 {
    debug_assert!(y > 0.0, "cubic constant term must be positive");
    let m = |f: f64| f * f * f + x * f - y;
    let mut lo = if x < 0.0 { (-x / 3.0).sqrt() } else { 0.0 };
    let mut hi = lo.max(y.cbrt()).max(1.0);
    while m(hi) < 0.0 {
        hi *= 2.0;
    }
    while hi - lo > eps.max(f64::EPSILON * hi) {
        let mid = 0.5 * (lo + hi);
        if m(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut f = 0.5 * (lo + hi);
    for _ in 0..12 {
        let mf = m(f);
        if mf == 0.0 {
            break;
        }
        if mf < 0.0 {
            lo = lo.max(f);
        } else {
            hi = hi.min(f);
        }
        let deriv = 3.0 * f * f + x;
        if deriv <= 0.0 {
            break;
        }
        let mut next = f - mf / deriv;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if next == f {
            break;
        }
        f = next;
    }
    f
}
