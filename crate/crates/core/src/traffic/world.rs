//! World state and the fixed-step update.
//!
//! Each step of `dt` seconds:
//!
//! 1. injected fallback events due by now are applied;
//! 2. every `control_every` steps, platooned and platoon-candidate CACC
//!    vehicles run a reception trial against their predecessor and the
//!    fallback state machine is advanced;
//! 3. accelerations are computed (IDM for human drivers, the
//!    constant-time-gap law for automated CACC) and integrated with
//!    semi-implicit Euler, front to back per lane;
//! 4. vehicles past the end of the road are retired;
//! 5. lane changes are applied one vehicle at a time in id order;
//! 6. new arrivals are queued and inserted at the entry;
//! 7. invariants are checked.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::channel::{reception_trial, BroadcastRoster, ChannelModel, Receiver};
use crate::control::{
    cacc_accel, fallback_step, free_flow_accel, infeasibility_check, ControlMode, ControllerParams,
    FallbackEvent,
};
use crate::error::{Error, Result};
use crate::reception::{DsrcParams, ReceptionDiagnostics};
use crate::VehicleId;

use super::demand::{draw_arrivals, DemandSpec, PendingArrival};
use super::idm::{human_accel, IdmParams, Leader};
use super::lane_change::{lane_change_decision, LaneChangeParams, Lagger, Neighbors, Subject, TargetLane};
use super::network::{RoadNetwork, VehicleClass};

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub class: VehicleClass,
    /// 0 = rightmost lane.
    pub lane: usize,
    /// Front bumper position along the road (m).
    pub position_m: f64,
    pub speed: f64,
    pub accel: f64,
    pub desired_speed: f64,
    pub length_m: f64,
    pub control: ControlMode,
    /// Active controller headway (CACC vehicles).
    pub headway_s: f64,
    pub platoon_predecessor: Option<VehicleId>,
    pub consecutive_successes: u32,
    pub last_lane_change_step: Option<u64>,
}

impl Vehicle {
    pub fn is_automated_cacc(&self) -> bool {
        self.class == VehicleClass::Cacc && self.control.is_automated()
    }
}

/// Which vehicle an injected event targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleSelector {
    Id(VehicleId),
    /// Lowest-id platooned vehicle, else lowest-id automated CACC vehicle.
    FirstPlatooned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectedEvent {
    pub time_s: f64,
    pub selector: VehicleSelector,
    pub event: FallbackEvent,
}

/// Everything the step function needs besides the world state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub network: RoadNetwork,
    pub demand: DemandSpec,
    pub idm: IdmParams,
    pub lane_change: LaneChangeParams,
    pub controller: ControllerParams,
    pub dsrc: DsrcParams,
    pub channel: ChannelModel,
    pub dt: f64,
    pub control_every: u64,
    pub vehicle_length_m: f64,
    /// Gap the emergency clamp preserves behind every leader (m).
    pub emergency_gap_m: f64,
    pub injected_events: Vec<InjectedEvent>,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            network: RoadNetwork::freeway(super::network::LanePolicy::Dl),
            demand: DemandSpec::default(),
            idm: IdmParams::default(),
            lane_change: LaneChangeParams::default(),
            controller: ControllerParams::default(),
            dsrc: DsrcParams::default(),
            channel: ChannelModel::default(),
            dt: 0.5,
            control_every: 5,
            vehicle_length_m: 5.0,
            emergency_gap_m: 0.5,
            injected_events: Vec::new(),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.demand.validate()?;
        self.controller.validate()?;
        self.dsrc.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameters(format!("dt must be positive, got {}", self.dt)));
        }
        if self.control_every == 0 {
            return Err(Error::InvalidParameters("control_every must be >= 1".into()));
        }
        if !(self.vehicle_length_m > 0.0 && self.emergency_gap_m > 0.0) {
            return Err(Error::InvalidParameters(
                "vehicle_length_m and emergency_gap_m must be positive".into(),
            ));
        }
        if let ChannelModel::Constant(p) = self.channel {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange(p));
            }
        }
        Ok(())
    }

    /// Speed ceiling used by the speed invariant.
    pub fn speed_cap(&self) -> f64 {
        1.2 * self.demand.max_desired_speed()
    }
}

/// One reception trial as seen by the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub time_s: f64,
    pub vehicle_id: VehicleId,
    pub x_m: f64,
    pub delta_veh_per_km: f64,
    pub xi_events: f64,
    pub probability: f64,
    pub attempts_used: u8,
    pub success: bool,
    /// The receiver was platooned when the trial ran (counts toward
    /// reception metrics); otherwise it was a confirmation trial.
    pub platooned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord {
    pub time_s: f64,
    pub vehicle_id: VehicleId,
    pub from: ControlMode,
    pub event: Option<FallbackEvent>,
    pub to: ControlMode,
}

/// Hooks for logging and metric collection.
pub trait StepObserver {
    fn on_trial(&mut self, _record: &TrialRecord) {}
    fn on_transition(&mut self, _record: &TransitionRecord) {}
    /// Called after each completed step with the new state.
    fn on_step_end(&mut self, _world: &World) {}
}

impl StepObserver for () {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorldCounters {
    pub arrivals: u64,
    pub spawned: u64,
    pub retired: u64,
    pub lane_changes: u64,
    pub emergency_brakes: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepReport {
    pub control_step: bool,
    pub spawned: u32,
    pub retired: u32,
}

#[derive(Debug, Clone)]
pub struct World {
    params: SimParams,
    vehicles: Vec<Vehicle>,
    // Per lane: indices into `vehicles`, front (largest position) first.
    lanes: Vec<Vec<usize>>,
    leader_of: Vec<Option<usize>>,
    follower_of: Vec<Option<usize>>,
    queue: VecDeque<PendingArrival>,
    next_id: u32,
    step_index: u64,
    next_injected: usize,
    counters: WorldCounters,
    diagnostics: ReceptionDiagnostics,
}

impl World {
    pub fn new(mut params: SimParams) -> Result<Self> {
        params.validate()?;
        params
            .injected_events
            .sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        let lanes = vec![Vec::new(); params.network.lane_count];
        Ok(Self {
            params,
            vehicles: Vec::new(),
            lanes,
            leader_of: Vec::new(),
            follower_of: Vec::new(),
            queue: VecDeque::new(),
            next_id: 0,
            step_index: 0,
            next_injected: 0,
            counters: WorldCounters::default(),
            diagnostics: ReceptionDiagnostics::default(),
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&Vehicle> {
        self.index_of(id).map(|i| &self.vehicles[i])
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    /// Simulated time at the start of the next step.
    pub fn time_s(&self) -> f64 {
        self.step_index as f64 * self.params.dt
    }

    pub fn counters(&self) -> &WorldCounters {
        &self.counters
    }

    pub fn diagnostics(&self) -> &ReceptionDiagnostics {
        &self.diagnostics
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// Vehicle ids in `lane`, front first.
    pub fn lane_order(&self, lane: usize) -> Vec<VehicleId> {
        self.lanes
            .get(lane)
            .map(|l| l.iter().map(|&i| self.vehicles[i].id).collect())
            .unwrap_or_default()
    }

    /// Places a vehicle directly (scenario setup and tests).
    pub fn add_vehicle(
        &mut self,
        class: VehicleClass,
        lane: usize,
        position_m: f64,
        speed: f64,
        desired_speed: f64,
        control: ControlMode,
    ) -> Result<VehicleId> {
        if !self.params.network.permits(lane, class) {
            return Err(Error::InvalidParameters(format!("{class} not permitted in lane {lane}")));
        }
        if class != VehicleClass::Cacc && control != ControlMode::Human {
            return Err(Error::InvalidParameters(format!("{class} vehicles are human-driven")));
        }
        if !(0.0..=self.params.network.length_m).contains(&position_m) || speed < 0.0 {
            return Err(Error::InvalidParameters(format!(
                "bad initial state position {position_m}, speed {speed}"
            )));
        }
        let len = self.params.vehicle_length_m;
        for &j in &self.lanes[lane] {
            let o = &self.vehicles[j];
            let clear = if o.position_m >= position_m {
                o.position_m - o.length_m - position_m
            } else {
                position_m - len - o.position_m
            };
            if clear <= 0.0 {
                return Err(Error::InvalidParameters(format!("vehicle overlaps {}", o.id)));
            }
        }
        let id = self.push_vehicle(class, lane, position_m, speed, desired_speed, control);
        self.rebuild_lanes();
        Ok(id)
    }

    fn push_vehicle(
        &mut self,
        class: VehicleClass,
        lane: usize,
        position_m: f64,
        speed: f64,
        desired_speed: f64,
        control: ControlMode,
    ) -> VehicleId {
        let id = VehicleId(self.next_id);
        self.next_id += 1;
        self.counters.spawned += 1;
        self.vehicles.push(Vehicle {
            id,
            class,
            lane,
            position_m,
            speed,
            accel: 0.0,
            desired_speed,
            length_m: self.params.vehicle_length_m,
            control,
            headway_s: self.params.controller.headway_for(control),
            platoon_predecessor: None,
            consecutive_successes: 0,
            last_lane_change_step: None,
        });
        self.lanes[lane].push(self.vehicles.len() - 1);
        id
    }

    fn index_of(&self, id: VehicleId) -> Option<usize> {
        // Vehicles stay sorted by id.
        self.vehicles.binary_search_by_key(&id, |v| v.id).ok()
    }

    fn rebuild_lanes(&mut self) {
        for lane in &mut self.lanes {
            lane.clear();
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            self.lanes[v.lane].push(i);
        }
        let vehicles = &self.vehicles;
        for lane in &mut self.lanes {
            lane.sort_by(|&a, &b| {
                vehicles[b]
                    .position_m
                    .total_cmp(&vehicles[a].position_m)
                    .then(vehicles[a].id.cmp(&vehicles[b].id))
            });
        }
        self.refresh_links();
    }

    fn refresh_links(&mut self) {
        let n = self.vehicles.len();
        self.leader_of.clear();
        self.leader_of.resize(n, None);
        self.follower_of.clear();
        self.follower_of.resize(n, None);
        for lane in &self.lanes {
            for w in lane.windows(2) {
                self.leader_of[w[1]] = Some(w[0]);
                self.follower_of[w[0]] = Some(w[1]);
            }
        }
    }

    fn gap_between(&self, leader: usize, follower: usize) -> f64 {
        let l = &self.vehicles[leader];
        l.position_m - l.length_m - self.vehicles[follower].position_m
    }

    /// Predecessor `follower` may platoon with, if any.
    fn platoon_link(&self, follower: usize) -> Option<usize> {
        let v = &self.vehicles[follower];
        if !v.is_automated_cacc() {
            return None;
        }
        let net = &self.params.network;
        if !net.policy.platoon_lane(v.lane, net.lane_count) {
            return None;
        }
        let li = self.leader_of[follower]?;
        if !self.vehicles[li].is_automated_cacc() {
            return None;
        }
        let gap = self.gap_between(li, follower);
        let c = &self.params.controller;
        let limit = 2.0 * c.desired_gap(v.speed, c.long_headway_s);
        (gap <= limit).then_some(li)
    }

    fn set_mode<O: StepObserver + ?Sized>(
        &mut self,
        idx: usize,
        to: ControlMode,
        event: Option<FallbackEvent>,
        time_s: f64,
        obs: &mut O,
    ) {
        let v = &mut self.vehicles[idx];
        let from = v.control;
        if from == to {
            return;
        }
        v.control = to;
        v.headway_s = self.params.controller.headway_for(to);
        v.consecutive_successes = 0;
        if to != ControlMode::CaccPlatooned {
            v.platoon_predecessor = None;
        }
        obs.on_transition(&TransitionRecord {
            time_s,
            vehicle_id: v.id,
            from,
            event,
            to,
        });
    }

    fn apply_injected<O: StepObserver + ?Sized>(&mut self, t: f64, evented: &mut [bool], obs: &mut O) {
        while let Some(ev) = self.params.injected_events.get(self.next_injected).copied() {
            if ev.time_s > t + 1e-9 {
                break;
            }
            self.next_injected += 1;
            let target = match ev.selector {
                VehicleSelector::Id(id) => self.index_of(id),
                VehicleSelector::FirstPlatooned => self
                    .vehicles
                    .iter()
                    .position(|v| v.control == ControlMode::CaccPlatooned)
                    .or_else(|| self.vehicles.iter().position(|v| v.is_automated_cacc())),
            };
            let Some(idx) = target else { continue };
            if evented[idx] {
                continue;
            }
            evented[idx] = true;
            let v = &self.vehicles[idx];
            let to = fallback_step(
                v.control,
                Some(ev.event),
                v.consecutive_successes,
                &self.params.controller,
            );
            self.set_mode(idx, to, Some(ev.event), t, obs);
        }
    }

    fn control_phase<R: Rng + ?Sized, O: StepObserver + ?Sized>(
        &mut self,
        t: f64,
        rng: &mut R,
        evented: &[bool],
        obs: &mut O,
    ) -> Result<()> {
        let roster = BroadcastRoster::from_entries(
            self.vehicles
                .iter()
                .filter(|v| v.control.is_broadcasting())
                .map(|v| (v.position_m, v.id)),
        );
        let controller = self.params.controller;

        #[allow(clippy::needless_range_loop)]
        for idx in 0..self.vehicles.len() {
            if !self.vehicles[idx].is_automated_cacc() {
                continue;
            }
            let Some(li) = self.platoon_link(idx) else {
                self.vehicles[idx].consecutive_successes = 0;
                continue;
            };
            let (v, l) = (&self.vehicles[idx], &self.vehicles[li]);
            let x = l.position_m - v.position_m;
            let receiver = Receiver {
                id: Some(v.id),
                position_m: v.position_m,
            };
            let outcome = reception_trial(
                x,
                receiver,
                &roster,
                &self.params.channel,
                &self.params.dsrc,
                rng,
                &mut self.diagnostics,
            )?;
            self.counters.trials += 1;
            let mode = v.control;
            obs.on_trial(&TrialRecord {
                time_s: t,
                vehicle_id: v.id,
                x_m: x,
                delta_veh_per_km: outcome.load.delta_veh_per_km,
                xi_events: outcome.load.xi_events,
                probability: outcome.probability_used,
                attempts_used: outcome.attempts_used,
                success: outcome.success,
                platooned: mode == ControlMode::CaccPlatooned,
            });

            let event = match mode {
                _ if evented[idx] => None,
                ControlMode::CaccPlatooned if !outcome.success => Some(FallbackEvent::PacketDrop),
                ControlMode::CaccPlatooned => infeasibility_check(
                    self.gap_between(li, idx),
                    v.speed,
                    l.speed,
                    controller.short_headway_s,
                    &controller,
                ),
                _ => None,
            };
            if mode == ControlMode::AccFallback {
                let v = &mut self.vehicles[idx];
                v.consecutive_successes = if outcome.success {
                    v.consecutive_successes + 1
                } else {
                    0
                };
            }
            let next = fallback_step(
                mode,
                event,
                self.vehicles[idx].consecutive_successes,
                &controller,
            );
            self.set_mode(idx, next, event, t, obs);
            if next == ControlMode::CaccPlatooned && mode != next {
                // Platoon confirmation also enrolls an unplatooned head.
                if self.vehicles[li].control == ControlMode::AccFallback {
                    self.set_mode(li, ControlMode::CaccPlatooned, None, t, obs);
                }
            }
        }

        // Platooned vehicles without a platooned neighbour revert to ACC.
        loop {
            let mut changed = false;
            for idx in 0..self.vehicles.len() {
                if self.vehicles[idx].control != ControlMode::CaccPlatooned {
                    continue;
                }
                let up = self
                    .platoon_link(idx)
                    .filter(|&li| self.vehicles[li].control == ControlMode::CaccPlatooned);
                let down = self.follower_of[idx].filter(|&fi| {
                    self.vehicles[fi].control == ControlMode::CaccPlatooned
                        && self.platoon_link(fi) == Some(idx)
                });
                if up.is_none() && down.is_none() {
                    self.set_mode(idx, ControlMode::AccFallback, None, t, obs);
                    changed = true;
                } else {
                    self.vehicles[idx].platoon_predecessor = up.map(|li| self.vehicles[li].id);
                }
            }
            if !changed {
                break;
            }
        }
        Ok(())
    }

    fn compute_accel(&self, idx: usize) -> f64 {
        let v = &self.vehicles[idx];
        let leader = self.leader_of[idx].map(|li| Leader {
            gap_m: self.gap_between(li, idx),
            speed: self.vehicles[li].speed,
        });
        if v.is_automated_cacc() {
            let c = &self.params.controller;
            let free = free_flow_accel(v.speed, v.desired_speed, c);
            match leader {
                Some(l) => cacc_accel(l.gap_m, v.speed, l.speed, v.headway_s, c).min(free),
                None => free,
            }
        } else {
            human_accel(leader, v.speed, v.desired_speed, &self.params.idm)
        }
    }

    fn integrate(&mut self) {
        let dt = self.params.dt;
        let accels: Vec<f64> = (0..self.vehicles.len()).map(|i| self.compute_accel(i)).collect();
        for lane in 0..self.lanes.len() {
            let mut ahead: Option<usize> = None;
            for k in 0..self.lanes[lane].len() {
                let idx = self.lanes[lane][k];
                let v = &self.vehicles[idx];
                let cap = 1.2 * v.desired_speed;
                let mut speed = (v.speed + accels[idx] * dt).clamp(0.0, cap);
                if let Some(li) = ahead {
                    let l = &self.vehicles[li];
                    let limit = l.position_m - l.length_m - self.params.emergency_gap_m;
                    if v.position_m + speed * dt > limit {
                        speed = ((limit - v.position_m) / dt).max(0.0);
                        self.counters.emergency_brakes += 1;
                    }
                }
                let v = &mut self.vehicles[idx];
                v.accel = (speed - v.speed) / dt;
                v.speed = speed;
                v.position_m += speed * dt;
                ahead = Some(idx);
            }
        }
    }

    fn retire(&mut self) -> u32 {
        let length = self.params.network.length_m;
        let before = self.vehicles.len();
        self.vehicles.retain(|v| v.position_m <= length);
        let retired = (before - self.vehicles.len()) as u32;
        self.counters.retired += retired as u64;
        retired
    }

    fn target_lane(&self, idx: usize, lane: usize) -> TargetLane {
        let v = &self.vehicles[idx];
        let order = &self.lanes[lane];
        let k = order.partition_point(|&j| self.vehicles[j].position_m > v.position_m);
        let lead = k.checked_sub(1).map(|p| {
            let l = &self.vehicles[order[p]];
            Leader {
                gap_m: l.position_m - l.length_m - v.position_m,
                speed: l.speed,
            }
        });
        let lag = order.get(k).map(|&j| {
            let f = &self.vehicles[j];
            Lagger {
                gap_m: v.position_m - v.length_m - f.position_m,
                speed: f.speed,
                desired_speed: f.desired_speed,
            }
        });
        TargetLane { lane, lead, lag }
    }

    fn lane_changes(&mut self) {
        let lane_count = self.params.network.lane_count;
        let cooldown = self.params.lane_change.cooldown_steps;
        let step = self.step_index;
        for idx in 0..self.vehicles.len() {
            let v = &self.vehicles[idx];
            if v.control == ControlMode::CaccPlatooned {
                continue;
            }
            if v.last_lane_change_step.is_some_and(|s| step < s + cooldown) {
                continue;
            }
            let lane = v.lane;
            let current_lead = self.lanes[lane]
                .iter()
                .position(|&j| j == idx)
                .and_then(|p| p.checked_sub(1))
                .map(|p| {
                    let li = self.lanes[lane][p];
                    Leader {
                        gap_m: self.gap_between(li, idx),
                        speed: self.vehicles[li].speed,
                    }
                });
            let neighbors = Neighbors {
                current_lead,
                left: (lane + 1 < lane_count).then(|| self.target_lane(idx, lane + 1)),
                right: lane.checked_sub(1).map(|l| self.target_lane(idx, l)),
            };
            let subject = Subject {
                class: v.class,
                mode: v.control,
                lane,
                position_m: v.position_m,
                speed: v.speed,
                desired_speed: v.desired_speed,
            };
            let Some(target) = lane_change_decision(
                &subject,
                &neighbors,
                &self.params.network,
                &self.params.idm,
                &self.params.lane_change,
            ) else {
                continue;
            };
            let pos = self.vehicles[idx].position_m;
            self.lanes[lane].retain(|&j| j != idx);
            let vehicles = &self.vehicles;
            let k = self.lanes[target].partition_point(|&j| vehicles[j].position_m > pos);
            self.lanes[target].insert(k, idx);
            let v = &mut self.vehicles[idx];
            v.lane = target;
            v.last_lane_change_step = Some(step);
            self.counters.lane_changes += 1;
        }
        self.refresh_links();
    }

    fn spawn<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> u32 {
        let arrivals = draw_arrivals(&self.params.demand, t, self.params.dt, rng);
        self.counters.arrivals += arrivals.len() as u64;
        self.queue.extend(arrivals);

        let mut spawned = 0;
        while let Some(a) = self.queue.front().copied() {
            let Some((lane, speed)) = self.entry_slot(&a) else {
                break;
            };
            self.queue.pop_front();
            let control = if a.class == VehicleClass::Cacc {
                ControlMode::AccFallback
            } else {
                ControlMode::Human
            };
            self.push_vehicle(a.class, lane, 0.0, speed, a.desired_speed, control);
            spawned += 1;
        }
        if spawned > 0 {
            self.refresh_links();
        }
        spawned
    }

    /// Least-occupied permitted lane with room at the entry, and the speed
    /// to enter it with.
    fn entry_slot(&self, a: &PendingArrival) -> Option<(usize, f64)> {
        let idm = &self.params.idm;
        let mut best: Option<(usize, f64, usize)> = None;
        for lane in 0..self.lanes.len() {
            if !self.params.network.permits(lane, a.class) {
                continue;
            }
            let (room, speed) = match self.lanes[lane].last() {
                None => (true, a.desired_speed),
                Some(&j) => {
                    let last = &self.vehicles[j];
                    let gap = last.position_m - last.length_m;
                    let speed = if gap >= idm.min_gap_m + 1.5 * a.desired_speed * idm.time_headway_s {
                        a.desired_speed
                    } else {
                        a.desired_speed.min(last.speed)
                    };
                    (gap >= idm.min_gap_m + speed * idm.time_headway_s, speed)
                }
            };
            if !room {
                continue;
            }
            let occupancy = self.lanes[lane].len();
            if best.is_none_or(|(_, _, occ)| occupancy < occ) {
                best = Some((lane, speed, occupancy));
            }
        }
        best.map(|(lane, speed, _)| (lane, speed))
    }

    fn check_invariants(&self, t: f64) -> Result<()> {
        let breach = |message: alloc::string::String| Err(Error::InvariantBreach { time_s: t, message });
        let net = &self.params.network;
        let cap = self.params.speed_cap();
        for lane in &self.lanes {
            for w in lane.windows(2) {
                let gap = self.gap_between(w[0], w[1]);
                if gap <= 0.0 {
                    return breach(format!(
                        "collision: vehicle {} gap {gap} behind {}",
                        self.vehicles[w[1]].id, self.vehicles[w[0]].id
                    ));
                }
            }
        }
        for v in &self.vehicles {
            if !net.permits(v.lane, v.class) {
                return breach(format!("{} vehicle {} in barred lane {}", v.class, v.id, v.lane));
            }
            if !(0.0..=cap).contains(&v.speed) {
                return breach(format!("vehicle {} speed {} outside [0, {cap}]", v.id, v.speed));
            }
            if !(0.0..=net.length_m).contains(&v.position_m) {
                return breach(format!("vehicle {} position {} off road", v.id, v.position_m));
            }
            if v.is_automated_cacc() && v.headway_s != self.params.controller.headway_for(v.control) {
                return breach(format!(
                    "vehicle {} in {} with headway {}",
                    v.id, v.control, v.headway_s
                ));
            }
        }
        Ok(())
    }

    /// Advances the world by one step of `dt`.
    pub fn step<R: Rng + ?Sized, O: StepObserver + ?Sized>(
        &mut self,
        rng: &mut R,
        obs: &mut O,
    ) -> Result<StepReport> {
        let t = self.time_s();
        let control_step = self.step_index.is_multiple_of(self.params.control_every);
        let mut evented = vec![false; self.vehicles.len()];

        self.apply_injected(t, &mut evented, obs);
        if control_step {
            self.control_phase(t, rng, &evented, obs)?;
        }
        self.integrate();
        let retired = self.retire();
        self.rebuild_lanes();
        self.lane_changes();
        let spawned = self.spawn(t, rng);

        self.step_index += 1;
        self.check_invariants(self.time_s())?;
        obs.on_step_end(self);
        Ok(StepReport {
            control_step,
            spawned,
            retired,
        })
    }
}
