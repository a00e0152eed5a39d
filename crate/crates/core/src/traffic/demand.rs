use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::{normal, poisson, uniform01};

use super::network::VehicleClass;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandSpec {
    pub volume_vph: f64,
    /// Share of arrivals equipped with CACC.
    pub mpr: f64,
    /// Share of the non-CACC arrivals that are HOV.
    pub hov_fraction: f64,
    pub desired_speed_mean: f64,
    pub desired_speed_std: f64,
}

impl Default for DemandSpec {
    fn default() -> Self {
        Self {
            volume_vph: 6000.0,
            mpr: 0.4,
            hov_fraction: 0.1,
            desired_speed_mean: 33.3,
            desired_speed_std: 2.0,
        }
    }
}

impl DemandSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidParameters(m));
        if !(self.volume_vph >= 0.0 && self.volume_vph.is_finite()) {
            return bad(format!("volume_vph must be >= 0, got {}", self.volume_vph));
        }
        if !(0.0..=1.0).contains(&self.mpr) {
            return bad(format!("mpr must be in [0, 1], got {}", self.mpr));
        }
        if !(0.0..=1.0).contains(&self.hov_fraction) {
            return bad(format!("hov_fraction must be in [0, 1], got {}", self.hov_fraction));
        }
        if !(self.desired_speed_mean > 0.0 && self.desired_speed_std >= 0.0) {
            return bad(format!(
                "desired speed distribution invalid: mean {}, std {}",
                self.desired_speed_mean, self.desired_speed_std
            ));
        }
        if self.desired_speed_mean - 3.0 * self.desired_speed_std <= 0.0 {
            return bad(format!(
                "desired_speed_std {} too large for mean {}",
                self.desired_speed_std, self.desired_speed_mean
            ));
        }
        Ok(())
    }

    /// Expected arrivals in an interval of `dt` seconds.
    pub fn arrivals_per_step(&self, dt: f64) -> f64 {
        self.volume_vph / 3600.0 * dt
    }

    /// Largest desired speed the distribution can produce (truncated at 3 sigma).
    pub fn max_desired_speed(&self) -> f64 {
        self.desired_speed_mean + 3.0 * self.desired_speed_std
    }
}

/// An arrival waiting at the network entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingArrival {
    pub class: VehicleClass,
    pub desired_speed: f64,
    pub arrival_time_s: f64,
}

/// Draws the class of one arrival.
pub fn draw_class<R: Rng + ?Sized>(demand: &DemandSpec, rng: &mut R) -> VehicleClass {
    if uniform01(rng) < demand.mpr {
        VehicleClass::Cacc
    } else if uniform01(rng) < demand.hov_fraction {
        VehicleClass::HovHuman
    } else {
        VehicleClass::GpHuman
    }
}

/// Poisson arrivals over one step of `dt` seconds.
pub fn draw_arrivals<R: Rng + ?Sized>(
    demand: &DemandSpec,
    time_s: f64,
    dt: f64,
    rng: &mut R,
) -> Vec<PendingArrival> {
    let n = poisson(rng, demand.arrivals_per_step(dt));
    (0..n)
        .map(|_| {
            let class = draw_class(demand, rng);
            let lo = demand.desired_speed_mean - 3.0 * demand.desired_speed_std;
            let hi = demand.max_desired_speed();
            let desired_speed =
                normal(rng, demand.desired_speed_mean, demand.desired_speed_std).clamp(lo, hi);
            PendingArrival {
                class,
                desired_speed,
                arrival_time_s: time_s,
            }
        })
        .collect()
}
