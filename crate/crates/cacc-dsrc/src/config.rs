//! Scenario configuration files (TOML).
//!
//! Every key is optional; a missing key takes the default of the matching
//! core parameter struct. Unknown keys are rejected. The grammar is
//! documented in the README.

use std::path::{Path, PathBuf};

use cacc_dsrc_core::channel::ChannelModel;
use cacc_dsrc_core::coefficients::CoefficientTable;
use cacc_dsrc_core::control::{ControllerParams, FallbackEvent};
use cacc_dsrc_core::reception::DsrcParams;
use cacc_dsrc_core::scenario::ScenarioConfig;
use cacc_dsrc_core::traffic::{
    AccessZone, DemandSpec, IdmParams, InjectedEvent, LaneChangeParams, LanePolicy, RoadNetwork,
    VehicleSelector,
};
use cacc_dsrc_core::VehicleId;
use serde::Deserialize;

use crate::error::{AppError, AppResult};

/// MPR levels swept when the file does not list any.
pub const DEFAULT_SWEEP_MPRS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub scenario: ScenarioSection,
    pub demand: DemandSection,
    pub road: RoadSection,
    pub dsrc: DsrcSection,
    pub controller: ControllerSection,
    pub idm: IdmSection,
    pub lane_change: LaneChangeSection,
    pub events: Vec<EventSection>,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub policy: String,
    pub mpr: f64,
    pub horizon_s: f64,
    pub warmup_s: f64,
    pub dt: f64,
    pub control_every: u64,
    pub replications: u32,
    pub base_seed: u64,
    pub vehicle_length_m: f64,
    pub emergency_gap_m: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let c = ScenarioConfig::default();
        Self {
            policy: c.policy().as_str().to_owned(),
            mpr: c.mpr(),
            horizon_s: c.horizon_s,
            warmup_s: c.warmup_s,
            dt: c.dt,
            control_every: c.control_every,
            replications: c.replications,
            base_seed: c.base_seed,
            vehicle_length_m: c.vehicle_length_m,
            emergency_gap_m: c.emergency_gap_m,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandSection {
    pub volume_vph: f64,
    pub hov_fraction: f64,
    pub desired_speed_mean: f64,
    pub desired_speed_std: f64,
}

impl Default for DemandSection {
    fn default() -> Self {
        let d = DemandSpec::default();
        Self {
            volume_vph: d.volume_vph,
            hov_fraction: d.hov_fraction,
            desired_speed_mean: d.desired_speed_mean,
            desired_speed_std: d.desired_speed_std,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoadSection {
    pub length_m: f64,
    pub lane_count: usize,
    /// `[start_m, end_m]` pairs; only used under DLA. Defaults apply when absent.
    pub access_zones: Option<Vec<[f64; 2]>>,
}

impl Default for RoadSection {
    fn default() -> Self {
        let n = RoadNetwork::freeway(LanePolicy::Base);
        Self {
            length_m: n.length_m,
            lane_count: n.lane_count,
            access_zones: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsrcSection {
    pub range_m: f64,
    pub frequency_hz: f64,
    /// Coefficient file, relative to the config file.
    pub coefficients: Option<PathBuf>,
    /// Replace the analytical model with a fixed per-attempt probability.
    pub constant_probability: Option<f64>,
}

impl Default for DsrcSection {
    fn default() -> Self {
        let d = DsrcParams::default();
        Self {
            range_m: d.range_m,
            frequency_hz: d.frequency_hz,
            coefficients: None,
            constant_probability: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub short_headway_s: f64,
    pub long_headway_s: f64,
    pub standstill_gap_m: f64,
    pub accel_max: f64,
    pub decel_max: f64,
    pub speed_gain: f64,
    pub gap_gain: f64,
    pub rejoin_threshold: u32,
    pub infeasibility_factor: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let c = ControllerParams::default();
        Self {
            short_headway_s: c.short_headway_s,
            long_headway_s: c.long_headway_s,
            standstill_gap_m: c.standstill_gap_m,
            accel_max: c.accel_max,
            decel_max: c.decel_max,
            speed_gain: c.speed_gain,
            gap_gain: c.gap_gain,
            rejoin_threshold: c.rejoin_threshold,
            infeasibility_factor: c.infeasibility_factor,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmSection {
    pub desired_speed: f64,
    pub time_headway_s: f64,
    pub min_gap_m: f64,
    pub accel_max: f64,
    pub comfortable_decel: f64,
    pub emergency_decel: f64,
}

impl Default for IdmSection {
    fn default() -> Self {
        let p = IdmParams::default();
        Self {
            desired_speed: p.desired_speed,
            time_headway_s: p.time_headway_s,
            min_gap_m: p.min_gap_m,
            accel_max: p.accel_max,
            comfortable_decel: p.comfortable_decel,
            emergency_decel: p.emergency_decel,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaneChangeSection {
    pub advantage_threshold: f64,
    pub managed_lane_bias: f64,
    pub safe_decel: f64,
    pub min_gap_m: f64,
    pub cooldown_steps: u64,
}

impl Default for LaneChangeSection {
    fn default() -> Self {
        let p = LaneChangeParams::default();
        Self {
            advantage_threshold: p.advantage_threshold,
            managed_lane_bias: p.managed_lane_bias,
            safe_decel: p.safe_decel,
            min_gap_m: p.min_gap_m,
            cooldown_steps: p.cooldown_steps,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SelectorRepr {
    Id(u32),
    Name(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSection {
    pub time_s: f64,
    pub vehicle: SelectorRepr,
    pub event: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub policies: Option<Vec<String>>,
    pub mprs: Option<Vec<f64>>,
}

/// Validated configuration: a base scenario plus the sweep matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub base: ScenarioConfig,
    /// Zones used whenever a cell runs under DLA.
    pub dla_zones: Vec<AccessZone>,
    pub sweep_policies: Vec<LanePolicy>,
    pub sweep_mprs: Vec<f64>,
}

impl RunConfig {
    /// Scenario for one cell of the matrix.
    pub fn cell(&self, policy: LanePolicy, mpr: f64) -> ScenarioConfig {
        let mut c = self.base.clone();
        c.network.policy = policy;
        c.network.access_zones = if policy.has_access_control() {
            self.dla_zones.clone()
        } else {
            Vec::new()
        };
        c.demand.mpr = mpr;
        c
    }

    /// Checks every cell the configuration can produce.
    pub fn validate(&self) -> AppResult<()> {
        let cells = self
            .sweep_policies
            .iter()
            .flat_map(|&p| self.sweep_mprs.iter().map(move |&m| (p, m)))
            .chain([(self.base.policy(), self.base.mpr())]);
        for (p, m) in cells {
            self.cell(p, m)
                .validate()
                .map_err(|e| AppError::Config(format!("{p} at mpr {m}: {e}")))?;
        }
        Ok(())
    }
}

fn policy(name: &str) -> AppResult<LanePolicy> {
    LanePolicy::parse(name).ok_or_else(|| {
        AppError::Config(format!(
            "unknown policy {name:?} (expected one of BASE, UML, MML, DL, DLA)"
        ))
    })
}

impl ConfigFile {
    pub fn parse(text: &str) -> AppResult<Self> {
        toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            AppError::Config(m) => AppError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Resolves names and files and validates. `base_dir` anchors relative
    /// paths inside the file.
    pub fn resolve(&self, base_dir: &Path) -> AppResult<RunConfig> {
        let s = &self.scenario;
        let base_policy = policy(&s.policy)?;

        let channel = match (&self.dsrc.constant_probability, &self.dsrc.coefficients) {
            (Some(_), Some(_)) => {
                return Err(AppError::Config(
                    "dsrc.constant_probability and dsrc.coefficients are exclusive".into(),
                ))
            }
            (Some(p), None) => ChannelModel::Constant(*p),
            (None, Some(file)) => ChannelModel::Analytical(load_coefficients(&base_dir.join(file))?),
            (None, None) => ChannelModel::default(),
        };

        let dla_zones = match &self.road.access_zones {
            Some(z) => z
                .iter()
                .map(|&[start_m, end_m]| AccessZone { start_m, end_m })
                .collect(),
            None => RoadNetwork::default_access_zones(),
        };

        let injected_events = self
            .events
            .iter()
            .map(|e| {
                let selector = match &e.vehicle {
                    SelectorRepr::Id(id) => VehicleSelector::Id(VehicleId(*id)),
                    SelectorRepr::Name(n) if n == "first-platooned" => VehicleSelector::FirstPlatooned,
                    SelectorRepr::Name(n) => {
                        return Err(AppError::Config(format!(
                            "event vehicle {n:?}: expected an id or \"first-platooned\""
                        )))
                    }
                };
                let event = FallbackEvent::parse(&e.event).ok_or_else(|| {
                    AppError::Config(format!(
                        "unknown event {:?} (expected PACKET_DROP, INFEASIBLE_SOLUTION, ODD_EXIT or ADS_FAILURE)",
                        e.event
                    ))
                })?;
                Ok(InjectedEvent {
                    time_s: e.time_s,
                    selector,
                    event,
                })
            })
            .collect::<AppResult<Vec<_>>>()?;

        let c = &self.controller;
        let i = &self.idm;
        let l = &self.lane_change;
        let d = &self.demand;
        let base = ScenarioConfig {
            network: RoadNetwork {
                length_m: self.road.length_m,
                lane_count: self.road.lane_count,
                policy: base_policy,
                access_zones: Vec::new(),
            },
            demand: DemandSpec {
                volume_vph: d.volume_vph,
                mpr: s.mpr,
                hov_fraction: d.hov_fraction,
                desired_speed_mean: d.desired_speed_mean,
                desired_speed_std: d.desired_speed_std,
            },
            idm: IdmParams {
                desired_speed: i.desired_speed,
                time_headway_s: i.time_headway_s,
                min_gap_m: i.min_gap_m,
                accel_max: i.accel_max,
                comfortable_decel: i.comfortable_decel,
                emergency_decel: i.emergency_decel,
            },
            lane_change: LaneChangeParams {
                advantage_threshold: l.advantage_threshold,
                managed_lane_bias: l.managed_lane_bias,
                safe_decel: l.safe_decel,
                min_gap_m: l.min_gap_m,
                cooldown_steps: l.cooldown_steps,
            },
            controller: ControllerParams {
                short_headway_s: c.short_headway_s,
                long_headway_s: c.long_headway_s,
                standstill_gap_m: c.standstill_gap_m,
                accel_max: c.accel_max,
                decel_max: c.decel_max,
                speed_gain: c.speed_gain,
                gap_gain: c.gap_gain,
                rejoin_threshold: c.rejoin_threshold,
                infeasibility_factor: c.infeasibility_factor,
            },
            dsrc: DsrcParams {
                range_m: self.dsrc.range_m,
                frequency_hz: self.dsrc.frequency_hz,
            },
            channel,
            horizon_s: s.horizon_s,
            warmup_s: s.warmup_s,
            dt: s.dt,
            control_every: s.control_every,
            replications: s.replications,
            base_seed: s.base_seed,
            vehicle_length_m: s.vehicle_length_m,
            emergency_gap_m: s.emergency_gap_m,
            injected_events,
        };

        let sweep_policies = match &self.sweep.policies {
            Some(p) => p.iter().map(|n| policy(n)).collect::<AppResult<Vec<_>>>()?,
            None => vec![LanePolicy::Uml, LanePolicy::Mml, LanePolicy::Dl, LanePolicy::Dla],
        };
        let sweep_mprs = self
            .sweep
            .mprs
            .clone()
            .unwrap_or_else(|| DEFAULT_SWEEP_MPRS.to_vec());
        if sweep_policies.is_empty() || sweep_mprs.is_empty() {
            return Err(AppError::Config("sweep.policies and sweep.mprs must be non-empty".into()));
        }

        let mut run = RunConfig {
            base,
            dla_zones,
            sweep_policies,
            sweep_mprs,
        };
        run.base = run.cell(base_policy, s.mpr);
        run.validate()?;
        Ok(run)
    }
}

/// Reads a coefficient table file.
pub fn load_coefficients(path: &Path) -> AppResult<CoefficientTable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    CoefficientTable::parse(&text)
        .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
}

/// Loads and resolves a config file.
pub fn load_run_config(path: &Path) -> AppResult<RunConfig> {
    let file = ConfigFile::load(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    file.resolve(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> AppResult<RunConfig> {
        ConfigFile::parse(text)?.resolve(Path::new("."))
    }

    #[test]
    fn empty_file_is_default_scenario() {
        let run = resolve("").unwrap();
        assert_eq!(run.base, ScenarioConfig::default());
        assert_eq!(run.sweep_mprs, DEFAULT_SWEEP_MPRS.to_vec());
        assert_eq!(run.sweep_policies.len(), 4);
    }

    #[test]
    fn table_one_dl() {
        let run = resolve(
            r#"
            [scenario]
            policy = "DL"
            mpr = 0.4
            replications = 1

            [demand]
            volume_vph = 6000
            "#,
        )
        .unwrap();
        assert_eq!(run.base.policy(), LanePolicy::Dl);
        assert_eq!(run.base.replications, 1);
        assert!(run.base.network.access_zones.is_empty());
    }

    #[test]
    fn dla_gets_zones() {
        let run = resolve(
            r#"
            [scenario]
            policy = "dla"
            [road]
            access_zones = [[1000.0, 1400.0]]
            "#,
        )
        .unwrap();
        assert_eq!(
            run.base.network.access_zones,
            vec![AccessZone {
                start_m: 1000.0,
                end_m: 1400.0
            }]
        );
        assert!(run.cell(LanePolicy::Uml, 0.4).network.access_zones.is_empty());
    }

    #[test]
    fn events() {
        let run = resolve(
            r#"
            [[events]]
            time_s = 1000
            vehicle = "first-platooned"
            event = "ODD_EXIT"

            [[events]]
            time_s = 5
            vehicle = 12
            event = "ads_failure"
            "#,
        )
        .unwrap();
        assert_eq!(run.base.injected_events.len(), 2);
        assert_eq!(run.base.injected_events[1].selector, VehicleSelector::Id(VehicleId(12)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(resolve("[scenario]\nbogus = 1").is_err());
        assert!(resolve("[nope]").is_err());
        assert!(resolve("[scenario]\npolicy = \"HOT\"").is_err());
        assert!(resolve("[scenario]\nwarmup_s = 5000").is_err());
        assert!(resolve("[scenario]\nmpr = 1.5").is_err());
        assert!(resolve("[[events]]\ntime_s = 1\nvehicle = \"me\"\nevent = \"ODD_EXIT\"").is_err());
        assert!(resolve("[sweep]\nmprs = []").is_err());
        assert!(resolve("[sweep]\nmprs = [2.0]").is_err());
        assert!(resolve("[dsrc]\nconstant_probability = 0.5\ncoefficients = \"x\"").is_err());
        assert!(resolve("[dsrc]\ncoefficients = \"/does/not/exist\"").is_err());
    }
}
