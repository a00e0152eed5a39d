//! Analytical one-hop DSRC broadcast reception model.
//!
//! The reception probability of a packet sent over distance `x` is
//!
//! ```text
//! P(x) = exp(-3 (x/phi)^2) * (1 + sum_{i=1..4} h_i(xi, phi) * (x/phi)^i)
//! h_i(xi, phi) = sum_{j+k<=4} c_i(j,k) * xi^j * phi^k
//! ```
//!
//! with `phi` the transmission range in meters and `xi` the communication
//! density in events/s. The polynomial fit is valid for `xi <= 4400` and
//! `x <= phi`; outside that domain the value is still computed and clamped,
//! and the evaluation is flagged.

use crate::coefficients::{CoefficientTable, TERMS};
use crate::error::{Error, Result};

/// Largest communication density covered by the fitted polynomials.
pub const MAX_COMMUNICATION_DENSITY: f64 = 4400.0;

/// Transmission range and broadcast rate shared by all channel computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsrcParams {
    /// Transmission power range in meters.
    pub range_m: f64,
    /// Broadcast frequency in Hz.
    pub frequency_hz: f64,
}

impl Default for DsrcParams {
    fn default() -> Self {
        Self {
            range_m: 300.0,
            frequency_hz: 10.0,
        }
    }
}

impl DsrcParams {
    pub fn new(range_m: f64, frequency_hz: f64) -> Result<Self> {
        let p = Self {
            range_m,
            frequency_hz,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range_m > 0.0 && self.range_m.is_finite()) {
            return Err(Error::InvalidInput {
                name: "range_m",
                value: self.range_m,
            });
        }
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::InvalidInput {
                name: "frequency_hz",
                value: self.frequency_hz,
            });
        }
        Ok(())
    }

    pub fn range_km(&self) -> f64 {
        self.range_m / 1000.0
    }
}

/// Broadcaster density and the communication density derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelLoad {
    pub delta_veh_per_km: f64,
    pub xi_events: f64,
}

impl ChannelLoad {
    pub fn from_density(delta_veh_per_km: f64, params: &DsrcParams) -> Result<Self> {
        let xi_events =
            communication_density(delta_veh_per_km, params.range_m, params.frequency_hz)?;
        Ok(Self {
            delta_veh_per_km,
            xi_events,
        })
    }
}

fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput { name, value })
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput { name, value })
    }
}

/// Communication density `xi = delta * phi * f` in events/s.
///
/// `delta` is in veh/km and `range_m` in meters; the range enters in km.
pub fn communication_density(delta_veh_per_km: f64, range_m: f64, frequency_hz: f64) -> Result<f64> {
    require_non_negative("delta_veh_per_km", delta_veh_per_km)?;
    require_non_negative("range_m", range_m)?;
    require_non_negative("frequency_hz", frequency_hz)?;
    Ok(delta_veh_per_km * (range_m / 1000.0) * frequency_hz)
}

#[inline]
fn powu(base: f64, exp: u8) -> f64 {
    let mut acc = 1.0;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Evaluates `h_i(xi, phi)` with all 15 terms.
pub fn poly_h(table: &CoefficientTable, i: u8, xi: f64, phi: f64) -> Result<f64> {
    if !(1..=4).contains(&i) {
        return Err(Error::InvalidPolynomialIndex(i));
    }
    require_non_negative("xi", xi)?;
    require_non_negative("phi", phi)?;
    Ok(poly_h_unchecked(table, i as usize - 1, xi, phi))
}

fn poly_h_unchecked(table: &CoefficientTable, row: usize, xi: f64, phi: f64) -> f64 {
    let coeffs = &table.rows()[row];
    TERMS
        .iter()
        .zip(coeffs.iter())
        .map(|(&(j, k), &c)| c * powu(xi, j) * powu(phi, k))
        .sum()
}

/// Result of one reception-model evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Unclamped polynomial value.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub probability: f64,
    /// `xi > 4400` or `x > phi`.
    pub out_of_domain: bool,
}

impl Evaluation {
    pub fn clamped(&self) -> bool {
        self.raw != self.probability
    }
}

/// Full evaluation including the raw value and domain flags.
pub fn evaluate(table: &CoefficientTable, x: f64, xi: f64, phi: f64) -> Result<Evaluation> {
    require_non_negative("x", x)?;
    require_non_negative("xi", xi)?;
    require_positive("phi", phi)?;

    let r = x / phi;
    let mut series = 1.0;
    let mut rpow = 1.0;
    for row in 0..4 {
        rpow *= r;
        series += poly_h_unchecked(table, row, xi, phi) * rpow;
    }
    let raw = libm::exp(-3.0 * r * r) * series;
    Ok(Evaluation {
        raw,
        probability: raw.clamp(0.0, 1.0),
        out_of_domain: xi > MAX_COMMUNICATION_DENSITY || x > phi,
    })
}

/// Probability of a successful one-hop reception, clamped to `[0, 1]`.
pub fn reception_probability(table: &CoefficientTable, x: f64, xi: f64, phi: f64) -> Result<f64> {
    evaluate(table, x, xi, phi).map(|e| e.probability)
}

/// Running counters over many evaluations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReceptionDiagnostics {
    pub evaluations: u64,
    pub clamped: u64,
    pub out_of_domain: u64,
}

impl ReceptionDiagnostics {
    pub fn record(&mut self, e: &Evaluation) {
        self.evaluations += 1;
        self.clamped += e.clamped() as u64;
        self.out_of_domain += e.out_of_domain as u64;
    }

    pub fn merge(&mut self, other: &ReceptionDiagnostics) {
        self.evaluations += other.evaluations;
        self.clamped += other.clamped;
        self.out_of_domain += other.out_of_domain;
    }
}
