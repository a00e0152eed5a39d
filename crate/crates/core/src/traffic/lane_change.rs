//! Gap-acceptance lane changing with an incentive test.
//!
//! A move to an adjacent lane is accepted when the lane admits the vehicle
//! class, access control allows the crossing at the current position, both
//! gaps are positive and large enough that the new follower does not have
//! to brake harder than `safe_decel`, and the acceleration advantage (plus
//! a bias toward a managed lane the vehicle is meant for) exceeds a
//! threshold.

use crate::control::ControlMode;

use super::idm::{human_accel, IdmParams, Leader};
use super::network::{RoadNetwork, VehicleClass};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneChangeParams {
    /// Required acceleration advantage (m/s^2).
    pub advantage_threshold: f64,
    /// Incentive added for entering, or staying in, a managed lane the
    /// vehicle has priority in.
    pub managed_lane_bias: f64,
    /// Largest deceleration a move may impose on the new follower.
    pub safe_decel: f64,
    /// Minimum acceptable lead and lag gap (m).
    pub min_gap_m: f64,
    /// Steps a vehicle waits after a lane change before the next one.
    pub cooldown_steps: u64,
}

impl Default for LaneChangeParams {
    fn default() -> Self {
        Self {
            advantage_threshold: 0.2,
            managed_lane_bias: 1.0,
            safe_decel: 3.0,
            min_gap_m: 2.0,
            cooldown_steps: 10,
        }
    }
}

/// The vehicle behind the gap a lane changer would merge into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lagger {
    pub gap_m: f64,
    pub speed: f64,
    pub desired_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetLane {
    pub lane: usize,
    pub lead: Option<Leader>,
    pub lag: Option<Lagger>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Neighbors {
    pub current_lead: Option<Leader>,
    pub left: Option<TargetLane>,
    pub right: Option<TargetLane>,
}

/// The deciding vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subject {
    pub class: VehicleClass,
    pub mode: ControlMode,
    pub lane: usize,
    pub position_m: f64,
    pub speed: f64,
    pub desired_speed: f64,
}

fn lane_bias(subject: &Subject, lane: usize, network: &RoadNetwork, params: &LaneChangeParams) -> f64 {
    let policy = network.policy;
    let wants_managed = policy.has_priority(subject.class)
        && (subject.class != VehicleClass::Cacc || subject.mode.is_automated());
    if wants_managed && policy.managed_lane(network.lane_count) == Some(lane) {
        params.managed_lane_bias
    } else {
        0.0
    }
}

fn evaluate(
    subject: &Subject,
    target: &TargetLane,
    current_accel: f64,
    network: &RoadNetwork,
    idm: &IdmParams,
    params: &LaneChangeParams,
) -> Option<f64> {
    if !network.permits(target.lane, subject.class) {
        return None;
    }
    if !network.crossing_allowed(subject.lane, target.lane, subject.position_m) {
        return None;
    }
    if let Some(lead) = target.lead {
        if lead.gap_m < params.min_gap_m {
            return None;
        }
    }
    if let Some(lag) = target.lag {
        if lag.gap_m < params.min_gap_m {
            return None;
        }
        let imposed = human_accel(
            Some(Leader {
                gap_m: lag.gap_m,
                speed: subject.speed,
            }),
            lag.speed,
            lag.desired_speed,
            idm,
        );
        if imposed < -params.safe_decel {
            return None;
        }
    }
    let own = human_accel(target.lead, subject.speed, subject.desired_speed, idm);
    if own < -params.safe_decel {
        return None;
    }
    let incentive = own - current_accel + lane_bias(subject, target.lane, network, params)
        - lane_bias(subject, subject.lane, network, params);
    (incentive > params.advantage_threshold).then_some(incentive)
}

/// Target lane for `subject`, or `None` to stay.
pub fn lane_change_decision(
    subject: &Subject,
    neighbors: &Neighbors,
    network: &RoadNetwork,
    idm: &IdmParams,
    params: &LaneChangeParams,
) -> Option<usize> {
    let current = human_accel(neighbors.current_lead, subject.speed, subject.desired_speed, idm);
    let mut best: Option<(usize, f64)> = None;
    for target in [neighbors.left, neighbors.right].into_iter().flatten() {
        if let Some(score) = evaluate(subject, &target, current, network, idm, params) {
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((target.lane, score));
            }
        }
    }
    best.map(|(lane, _)| lane)
}
