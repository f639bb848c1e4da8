//! Unit conversions.
//!
//! All conversions happen once at config load; everything downstream works
//! in SI units (W, Hz, J, s, bits). Model sizes use 1 KB = 8192 bits.

/// Bits per kilobyte (1 KB = 1024 bytes).
pub const BITS_PER_KB: f64 = 8192.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn kb_to_bits(kb: f64) -> f64 {
    kb * BITS_PER_KB
}
