//! Freeway CACC simulation with an analytical DSRC reception model.
//!
//! The crate is `no_std` (with `alloc`): every computation here is pure and
//! driven by an explicit random stream, so a replication is bit-identical
//! for a given configuration and seed. File formats, configuration parsing
//! and the command line live in the `cacc-dsrc` companion crate.
//!
//! Layout:
//!
//! - [`coefficients`] / [`reception`]: the fitted reception polynomial and
//!   the communication-density relation.
//! - [`channel`]: broadcaster density and the five-attempt reception trial.
//! - [`control`]: fallback state machine and the constant-time-gap law.
//! - [`traffic`]: road network, lane policies, car following, lane
//!   changing, demand and the per-step world update.
//! - [`scenario`] / [`stats`]: replication driver and metric aggregation.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

use core::fmt;

pub mod channel;
pub mod coefficients;
pub mod control;
pub mod error;
pub mod reception;
pub mod sampling;
pub mod scenario;
pub mod stats;
pub mod traffic;

pub use error::{Error, Result};

/// Stable identifier of a simulated vehicle, assigned in spawn order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
