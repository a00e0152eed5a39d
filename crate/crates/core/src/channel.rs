//! Per-vehicle packet reception testing.
//!
//! Every control step a receiving vehicle estimates the local density of
//! broadcasting vehicles around it, turns it into a communication density,
//! evaluates the reception model for the distance to its predecessor and
//! draws up to [`MAX_ATTEMPTS`] independent uniform numbers. The first draw
//! below the reception probability delivers the status message.

use alloc::vec::Vec;

use rand::Rng;

use crate::coefficients::CoefficientTable;
use crate::error::{Error, Result};
use crate::reception::{self, ChannelLoad, DsrcParams, ReceptionDiagnostics};
use crate::sampling::uniform01;
use crate::VehicleId;

/// Transmission attempts per status message.
pub const MAX_ATTEMPTS: u8 = 5;

/// Positions of all vehicles broadcasting this step, all lanes pooled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BroadcastRoster {
    // Sorted by (position, id).
    entries: Vec<(f64, VehicleId)>,
}

impl BroadcastRoster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I: IntoIterator<Item = (f64, VehicleId)>>(iter: I) -> Self {
        let mut entries: Vec<_> = iter.into_iter().collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Self { entries }
    }

    /// Roster of anonymous broadcasters at the given positions.
    pub fn from_positions<I: IntoIterator<Item = f64>>(positions: I) -> Self {
        Self::from_entries(
            positions
                .into_iter()
                .enumerate()
                .map(|(i, p)| (p, VehicleId(u32::MAX - i as u32))),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Broadcasters in the closed interval `[lo, hi]`, not counting `exclude`.
    pub fn count_within(&self, lo: f64, hi: f64, exclude: Option<VehicleId>) -> usize {
        let start = self.entries.partition_point(|e| e.0 < lo);
        let end = self.entries.partition_point(|e| e.0 <= hi);
        let window = &self.entries[start..end.max(start)];
        match exclude {
            Some(id) => window.iter().filter(|e| e.1 != id).count(),
            None => window.len(),
        }
    }
}

/// The vehicle on the receiving end of a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receiver {
    pub id: Option<VehicleId>,
    pub position_m: f64,
}

/// Broadcaster density (veh/km) within `+-range_m` of the receiver.
pub fn local_broadcaster_density(receiver: Receiver, roster: &BroadcastRoster, range_m: f64) -> f64 {
    if range_m <= 0.0 {
        return 0.0;
    }
    let n = roster.count_within(
        receiver.position_m - range_m,
        receiver.position_m + range_m,
        receiver.id,
    );
    n as f64 / (2.0 * range_m / 1000.0)
}

/// One Bernoulli attempt: draws `u` on `[0, 1)` and succeeds iff `u < p`.
pub fn attempt_reception<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(uniform01(rng) < p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionOutcome {
    pub success: bool,
    /// `1..=5`; always 5 on failure.
    pub attempts_used: u8,
    /// Probability used for the last attempt.
    pub probability_used: f64,
    /// Channel load seen on the last attempt.
    pub load: ChannelLoad,
}

/// Source of the per-attempt reception probability.
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ChannelModel {
    /// The fitted analytical model.
    Analytical(CoefficientTable),
    /// Fixed probability regardless of distance and load.
    Constant(f64),
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel::Analytical(CoefficientTable::published())
    }
}

impl ChannelModel {
    pub fn probability(
        &self,
        x: f64,
        xi: f64,
        range_m: f64,
        diagnostics: &mut ReceptionDiagnostics,
    ) -> Result<f64> {
        match self {
            ChannelModel::Analytical(table) => {
                let e = reception::evaluate(table, x, xi, range_m)?;
                diagnostics.record(&e);
                Ok(e.probability)
            }
            ChannelModel::Constant(p) => {
                if (0.0..=1.0).contains(p) {
                    Ok(*p)
                } else {
                    Err(Error::ProbabilityOutOfRange(*p))
                }
            }
        }
    }
}

/// Generic attempt loop: `probe` is re-evaluated before every attempt.
pub fn run_attempts<R, F>(rng: &mut R, mut probe: F) -> Result<ReceptionOutcome>
where
    R: Rng + ?Sized,
    F: FnMut() -> Result<(f64, ChannelLoad)>,
{
    let mut last = (
        0.0,
        ChannelLoad {
            delta_veh_per_km: 0.0,
            xi_events: 0.0,
        },
    );
    for attempt in 1..=MAX_ATTEMPTS {
        last = probe()?;
        if attempt_reception(last.0, rng)? {
            return Ok(ReceptionOutcome {
                success: true,
                attempts_used: attempt,
                probability_used: last.0,
                load: last.1,
            });
        }
    }
    Ok(ReceptionOutcome {
        success: false,
        attempts_used: MAX_ATTEMPTS,
        probability_used: last.0,
        load: last.1,
    })
}

/// Full reception trial for a receiver `x` meters behind its predecessor.
///
/// Density, communication density and probability are recomputed on every
/// attempt from the (frozen) roster.
pub fn reception_trial<R: Rng + ?Sized>(
    x: f64,
    receiver: Receiver,
    roster: &BroadcastRoster,
    model: &ChannelModel,
    params: &DsrcParams,
    rng: &mut R,
    diagnostics: &mut ReceptionDiagnostics,
) -> Result<ReceptionOutcome> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidInput { name: "x", value: x });
    }
    run_attempts(rng, || {
        let delta = local_broadcaster_density(receiver, roster, params.range_m);
        let load = ChannelLoad::from_density(delta, params)?;
        let p = model.probability(x, load.xi_events, params.range_m, diagnostics)?;
        Ok((p, load))
    })
}
