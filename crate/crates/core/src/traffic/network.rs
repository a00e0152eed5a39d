use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VehicleClass {
    GpHuman,
    HovHuman,
    Cacc,
}

impl VehicleClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::GpHuman => "GP",
            VehicleClass::HovHuman => "HOV",
            VehicleClass::Cacc => "CACC",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which vehicle classes a lane admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneAccess {
    /// G: every class.
    General,
    /// H: HOV only.
    Hov,
    /// C: CACC only.
    Cacc,
    /// G+C: every class, CACC explicitly welcome.
    GeneralCacc,
    /// C+H: CACC and HOV.
    CaccHov,
}

impl LaneAccess {
    pub fn permits(self, class: VehicleClass) -> bool {
        use VehicleClass::*;
        match self {
            LaneAccess::General | LaneAccess::GeneralCacc => true,
            LaneAccess::Hov => class == HovHuman,
            LaneAccess::Cacc => class == Cacc,
            LaneAccess::CaccHov => class == Cacc || class == HovHuman,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            LaneAccess::General => "G",
            LaneAccess::Hov => "H",
            LaneAccess::Cacc => "C",
            LaneAccess::GeneralCacc => "G+C",
            LaneAccess::CaccHov => "C+H",
        }
    }
}

/// Managed-lane deployment strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LanePolicy {
    /// HOV lane on the left, general lanes elsewhere.
    Base,
    /// No managed lane; CACC shares every lane.
    Uml,
    /// Left lane shared by CACC and HOV.
    Mml,
    /// Left lane dedicated to CACC, open along its whole length.
    Dl,
    /// Left lane dedicated to CACC, entered and left only in access zones.
    Dla,
}

impl LanePolicy {
    pub const ALL: [LanePolicy; 5] = [
        LanePolicy::Base,
        LanePolicy::Uml,
        LanePolicy::Mml,
        LanePolicy::Dl,
        LanePolicy::Dla,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LanePolicy::Base => "BASE",
            LanePolicy::Uml => "UML",
            LanePolicy::Mml => "MML",
            LanePolicy::Dl => "DL",
            LanePolicy::Dla => "DLA",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str().eq_ignore_ascii_case(s))
    }

    /// Access rule of `lane` (0 = rightmost) on a road with `lane_count` lanes.
    pub fn lane_access(self, lane: usize, lane_count: usize) -> LaneAccess {
        let leftmost = lane + 1 == lane_count;
        match (self, leftmost) {
            (LanePolicy::Uml, _) => LaneAccess::GeneralCacc,
            (_, false) => LaneAccess::General,
            (LanePolicy::Base, true) => LaneAccess::Hov,
            (LanePolicy::Mml, true) => LaneAccess::CaccHov,
            (LanePolicy::Dl | LanePolicy::Dla, true) => LaneAccess::Cacc,
        }
    }

    pub fn permits(self, lane: usize, lane_count: usize, class: VehicleClass) -> bool {
        lane < lane_count && self.lane_access(lane, lane_count).permits(class)
    }

    /// The restricted leftmost lane, if the policy has one.
    pub fn managed_lane(self, lane_count: usize) -> Option<usize> {
        match self {
            LanePolicy::Uml => None,
            _ => Some(lane_count - 1),
        }
    }

    pub fn has_access_control(self) -> bool {
        self == LanePolicy::Dla
    }

    /// Whether `class` is one of the classes the managed lane is meant for.
    pub fn has_priority(self, class: VehicleClass) -> bool {
        match self {
            LanePolicy::Uml => false,
            LanePolicy::Base => class == VehicleClass::HovHuman,
            LanePolicy::Mml => class != VehicleClass::GpHuman,
            LanePolicy::Dl | LanePolicy::Dla => class == VehicleClass::Cacc,
        }
    }

    /// Lanes in which CACC vehicles may form platoons.
    pub fn platoon_lane(self, lane: usize, lane_count: usize) -> bool {
        match self {
            LanePolicy::Base | LanePolicy::Uml => self.permits(lane, lane_count, VehicleClass::Cacc),
            _ => Some(lane) == self.managed_lane(lane_count),
        }
    }
}

impl fmt::Display for LanePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Merge window `[start_m, end_m]` for the access-controlled lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessZone {
    pub start_m: f64,
    pub end_m: f64,
}

impl AccessZone {
    pub fn contains(&self, pos: f64) -> bool {
        pos >= self.start_m && pos <= self.end_m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub length_m: f64,
    pub lane_count: usize,
    pub policy: LanePolicy,
    pub access_zones: Vec<AccessZone>,
}

impl RoadNetwork {
    /// Default DLA merge windows: 500 m at 2 km and at 5 km.
    pub fn default_access_zones() -> Vec<AccessZone> {
        alloc::vec![
            AccessZone {
                start_m: 2000.0,
                end_m: 2500.0
            },
            AccessZone {
                start_m: 5000.0,
                end_m: 5500.0
            },
        ]
    }

    /// 8 km, four lanes, with default access zones under DLA.
    pub fn freeway(policy: LanePolicy) -> Self {
        Self {
            length_m: 8000.0,
            lane_count: 4,
            policy,
            access_zones: if policy.has_access_control() {
                Self::default_access_zones()
            } else {
                Vec::new()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidParameters(m));
        if !(self.length_m > 0.0 && self.length_m.is_finite()) {
            return bad(format!("length_m must be positive, got {}", self.length_m));
        }
        if self.lane_count < 2 {
            return bad(format!("lane_count must be >= 2, got {}", self.lane_count));
        }
        if !self.policy.has_access_control() && !self.access_zones.is_empty() {
            return bad(format!("access zones are only valid under DLA, policy is {}", self.policy));
        }
        let mut zones = self.access_zones.clone();
        zones.sort_by(|a, b| a.start_m.total_cmp(&b.start_m));
        for z in &zones {
            if !(z.start_m >= 0.0 && z.end_m <= self.length_m && z.start_m < z.end_m) {
                return bad(format!("access zone [{}, {}] outside road", z.start_m, z.end_m));
            }
        }
        for w in zones.windows(2) {
            if w[1].start_m <= w[0].end_m {
                return bad(format!(
                    "access zones [{}, {}] and [{}, {}] overlap",
                    w[0].start_m, w[0].end_m, w[1].start_m, w[1].end_m
                ));
            }
        }
        Ok(())
    }

    pub fn in_access_zone(&self, pos: f64) -> bool {
        self.access_zones.iter().any(|z| z.contains(pos))
    }

    pub fn permits(&self, lane: usize, class: VehicleClass) -> bool {
        self.policy.permits(lane, self.lane_count, class)
    }

    /// Whether a move between adjacent lanes `from` and `to` is allowed at
    /// `pos` by access control.
    pub fn crossing_allowed(&self, from: usize, to: usize, pos: f64) -> bool {
        if !self.policy.has_access_control() {
            return true;
        }
        let managed = self.policy.managed_lane(self.lane_count);
        if managed == Some(from) || managed == Some(to) {
            self.in_access_zone(pos)
        } else {
            true
        }
    }
}
