//! One replication of a scenario, with warm-up exclusion.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelModel;
use crate::control::ControllerParams;
use crate::error::{Error, Result};
use crate::reception::{DsrcParams, ReceptionDiagnostics};
use crate::stats::{Metrics, Observations};
use crate::traffic::{
    DemandSpec, IdmParams, InjectedEvent, LaneChangeParams, LanePolicy, RoadNetwork, SimParams,
    StepObserver, TrialRecord, TransitionRecord, World, WorldCounters,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub network: RoadNetwork,
    pub demand: DemandSpec,
    pub idm: IdmParams,
    pub lane_change: LaneChangeParams,
    pub controller: ControllerParams,
    pub dsrc: DsrcParams,
    pub channel: ChannelModel,
    pub horizon_s: f64,
    pub warmup_s: f64,
    pub dt: f64,
    pub control_every: u64,
    pub replications: u32,
    pub base_seed: u64,
    pub vehicle_length_m: f64,
    pub emergency_gap_m: f64,
    pub injected_events: Vec<InjectedEvent>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let sim = SimParams::default();
        Self {
            network: sim.network,
            demand: sim.demand,
            idm: sim.idm,
            lane_change: sim.lane_change,
            controller: sim.controller,
            dsrc: sim.dsrc,
            channel: sim.channel,
            horizon_s: 3900.0,
            warmup_s: 300.0,
            dt: sim.dt,
            control_every: sim.control_every,
            replications: 5,
            base_seed: 1,
            vehicle_length_m: sim.vehicle_length_m,
            emergency_gap_m: sim.emergency_gap_m,
            injected_events: sim.injected_events,
        }
    }
}

impl ScenarioConfig {
    pub fn policy(&self) -> LanePolicy {
        self.network.policy
    }

    pub fn mpr(&self) -> f64 {
        self.demand.mpr
    }

    /// Number of steps covering the horizon.
    pub fn steps(&self) -> u64 {
        libm::round(self.horizon_s / self.dt) as u64
    }

    /// Seed of replication `index`.
    pub fn seed_for(&self, index: u32) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            network: self.network.clone(),
            demand: self.demand,
            idm: self.idm,
            lane_change: self.lane_change,
            controller: self.controller,
            dsrc: self.dsrc,
            channel: self.channel,
            dt: self.dt,
            control_every: self.control_every,
            vehicle_length_m: self.vehicle_length_m,
            emergency_gap_m: self.emergency_gap_m,
            injected_events: self.injected_events.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameters(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.horizon_s && self.horizon_s.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "need 0 <= warmup_s < horizon_s, got {} and {}",
                self.warmup_s, self.horizon_s
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameters("replications must be >= 1".into()));
        }
        self.sim_params().validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub policy: LanePolicy,
    pub mpr: f64,
    pub seed: u64,
    pub observations: Observations,
    pub counters: WorldCounters,
    pub diagnostics: ReceptionDiagnostics,
    /// Vehicles on the road and waiting at the entry when the run ended.
    pub on_network: u64,
    pub queued: u64,
}

impl ReplicationResult {
    pub fn metrics(&self) -> Metrics {
        Metrics::from_observations(&self.observations)
    }

    /// Every arrival is on the road, waiting, or retired.
    pub fn conserved(&self) -> bool {
        let c = &self.counters;
        c.spawned == c.retired + self.on_network && c.arrivals == c.spawned + self.queued
    }
}

struct Collector<'a, O: ?Sized> {
    warmup_s: f64,
    obs: Observations,
    inner: &'a mut O,
}

impl<O: StepObserver + ?Sized> StepObserver for Collector<'_, O> {
    fn on_trial(&mut self, r: &TrialRecord) {
        if r.platooned && r.time_s >= self.warmup_s {
            self.obs.trials += 1;
            self.obs.successes += r.success as u64;
            self.obs.xi_samples.push(r.xi_events);
        }
        self.inner.on_trial(r);
    }

    fn on_transition(&mut self, r: &TransitionRecord) {
        if r.time_s >= self.warmup_s {
            if let Some(e) = r.event {
                self.obs.fallbacks.record(e);
            }
        }
        self.inner.on_transition(r);
    }

    fn on_step_end(&mut self, world: &World) {
        self.inner.on_step_end(world);
    }
}

/// Runs one replication. The observer sees every trial and transition,
/// including those inside the warm-up; metrics exclude them.
pub fn run_replication<O: StepObserver + ?Sized>(
    config: &ScenarioConfig,
    seed: u64,
    observer: &mut O,
) -> Result<ReplicationResult> {
    config.validate()?;
    let mut world = World::new(config.sim_params())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut collector = Collector {
        warmup_s: config.warmup_s,
        obs: Observations::default(),
        inner: observer,
    };
    let mut retired_after_warmup = 0u64;
    for _ in 0..config.steps() {
        let t = world.time_s();
        let report = world.step(&mut rng, &mut collector)?;
        if t >= config.warmup_s {
            retired_after_warmup += report.retired as u64;
        }
    }
    let measured_h = (config.steps() as f64 * config.dt - config.warmup_s) / 3600.0;
    let mut observations = collector.obs;
    observations.throughput_vph = retired_after_warmup as f64 / measured_h;
    Ok(ReplicationResult {
        policy: config.policy(),
        mpr: config.mpr(),
        seed,
        observations,
        counters: *world.counters(),
        diagnostics: *world.diagnostics(),
        on_network: world.vehicles().len() as u64,
        queued: world.queued() as u64,
    })
}
