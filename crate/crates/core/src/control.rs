//! CACC longitudinal control and the automation fallback state machine.

use core::fmt;

use crate::error::{Error, Result};

/// Who (or what) is driving a CACC-equipped vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControlMode {
    /// Human in control of the dynamic driving task.
    Human,
    /// Automated ACC with the long headway; platoon status revoked.
    AccFallback,
    /// Platooned CACC with the short headway; broadcasts status messages.
    CaccPlatooned,
}

impl ControlMode {
    pub const ALL: [ControlMode; 3] = [
        ControlMode::Human,
        ControlMode::AccFallback,
        ControlMode::CaccPlatooned,
    ];

    pub fn is_broadcasting(self) -> bool {
        self == ControlMode::CaccPlatooned
    }

    pub fn is_automated(self) -> bool {
        self != ControlMode::Human
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ControlMode::Human => "HUMAN",
            ControlMode::AccFallback => "ACC_FALLBACK",
            ControlMode::CaccPlatooned => "CACC_PLATOONED",
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Events that force the automation to fall back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FallbackEvent {
    PacketDrop,
    InfeasibleSolution,
    OddExit,
    AdsFailure,
}

impl FallbackEvent {
    pub const ALL: [FallbackEvent; 4] = [
        FallbackEvent::PacketDrop,
        FallbackEvent::InfeasibleSolution,
        FallbackEvent::OddExit,
        FallbackEvent::AdsFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FallbackEvent::PacketDrop => "PACKET_DROP",
            FallbackEvent::InfeasibleSolution => "INFEASIBLE_SOLUTION",
            FallbackEvent::OddExit => "ODD_EXIT",
            FallbackEvent::AdsFailure => "ADS_FAILURE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for FallbackEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    /// Time gap while platooned (s).
    pub short_headway_s: f64,
    /// Time gap in ACC fallback (s).
    pub long_headway_s: f64,
    pub standstill_gap_m: f64,
    pub accel_max: f64,
    /// Positive magnitude of the largest braking command.
    pub decel_max: f64,
    /// Gain on the speed difference to the leader (1/s).
    pub speed_gain: f64,
    /// Gain on the gap error (1/s^2).
    pub gap_gain: f64,
    /// Consecutive successful receptions needed to confirm a platoon.
    pub rejoin_threshold: u32,
    /// Unsaturated braking demand beyond `factor * decel_max` is infeasible.
    pub infeasibility_factor: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            short_headway_s: 0.6,
            long_headway_s: 1.5,
            standstill_gap_m: 2.0,
            accel_max: 2.0,
            decel_max: 4.0,
            speed_gain: 0.6,
            gap_gain: 0.23,
            rejoin_threshold: 10,
            infeasibility_factor: 1.5,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameters(alloc::string::String::from(m)));
        if !(self.short_headway_s > 0.0 && self.short_headway_s < self.long_headway_s) {
            return bad("need 0 < short_headway_s < long_headway_s");
        }
        if !(self.accel_max > 0.0 && self.decel_max > 0.0) {
            return bad("accel_max and decel_max must be positive");
        }
        if self.rejoin_threshold < 1 {
            return bad("rejoin_threshold must be >= 1");
        }
        if !(self.standstill_gap_m >= 0.0 && self.speed_gain >= 0.0 && self.gap_gain >= 0.0) {
            return bad("gains and standstill gap must be non-negative");
        }
        if !(self.infeasibility_factor >= 1.0) {
            return bad("infeasibility_factor must be >= 1");
        }
        Ok(())
    }

    /// Headway the controller regulates to in `mode`. Human drivers use
    /// their own car-following model, reported here as the long headway.
    pub fn headway_for(&self, mode: ControlMode) -> f64 {
        match mode {
            ControlMode::CaccPlatooned => self.short_headway_s,
            ControlMode::AccFallback | ControlMode::Human => self.long_headway_s,
        }
    }

    pub fn desired_gap(&self, speed: f64, headway_s: f64) -> f64 {
        self.standstill_gap_m + headway_s * speed
    }
}

/// One transition of the fallback state machine.
pub fn fallback_step(
    mode: ControlMode,
    event: Option<FallbackEvent>,
    consecutive_successes: u32,
    params: &ControllerParams,
) -> ControlMode {
    use ControlMode::*;
    use FallbackEvent::*;

    match (mode, event) {
        (Human, _) => Human,
        (_, Some(OddExit | AdsFailure)) => Human,
        (CaccPlatooned, Some(PacketDrop | InfeasibleSolution)) => AccFallback,
        (AccFallback, Some(_)) => AccFallback,
        (AccFallback, None) if consecutive_successes >= params.rejoin_threshold => CaccPlatooned,
        (m, None) => m,
    }
}

fn gap_law(gap_m: f64, speed: f64, lead_speed: f64, headway_s: f64, params: &ControllerParams) -> f64 {
    params.gap_gain * (gap_m - params.desired_gap(speed, headway_s))
        + params.speed_gain * (lead_speed - speed)
}

/// Constant-time-gap control law, saturated to `[-decel_max, accel_max]`.
pub fn cacc_accel(gap_m: f64, speed: f64, lead_speed: f64, headway_s: f64, params: &ControllerParams) -> f64 {
    gap_law(gap_m, speed, lead_speed, headway_s, params).clamp(-params.decel_max, params.accel_max)
}

/// Acceleration with no leader in range: approach `desired_speed`.
pub fn free_flow_accel(speed: f64, desired_speed: f64, params: &ControllerParams) -> f64 {
    if desired_speed <= 0.0 {
        return -params.decel_max;
    }
    let ratio = speed / desired_speed;
    let r2 = ratio * ratio;
    (params.accel_max * (1.0 - r2 * r2)).clamp(-params.decel_max, params.accel_max)
}

/// Flags an infeasible control problem: the unsaturated braking demand
/// exceeds `infeasibility_factor * decel_max`.
pub fn infeasibility_check(
    gap_m: f64,
    speed: f64,
    lead_speed: f64,
    headway_s: f64,
    params: &ControllerParams,
) -> Option<FallbackEvent> {
    let demand = gap_law(gap_m, speed, lead_speed, headway_s, params);
    if demand < -params.infeasibility_factor * params.decel_max {
        Some(FallbackEvent::InfeasibleSolution)
    } else {
        None
    }
}
