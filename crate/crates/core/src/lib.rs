//! Desk-scale simulator of federated learning over a wireless cell.
//!
//! The crate models one base station serving a disc of devices: the
//! [`net_model`] module prices a federated round in seconds and joules,
//! [`allocator`] splits the band and picks CPU frequencies to minimize
//! the round delay under per-device energy budgets, [`fl_engine`] trains
//! a small feedforward classifier with hand-written gradients,
//! [`datasets`] builds synthetic non-iid partitions (plus an IDX
//! loader), [`clustering`] groups devices by layer-sliced model weights,
//! [`selection`] picks each round's participants, and [`harness`] wires
//! the full workflow into deterministic, seeded experiments with CSV
//! metrics.

pub mod allocator;
pub mod clustering;
pub mod datasets;
pub mod error;
pub mod fl_engine;
pub mod harness;
pub mod net_model;
pub mod rng;
pub mod selection;
pub mod units;

pub use error::{Error, Result};
