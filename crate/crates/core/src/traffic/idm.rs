//! Intelligent Driver Model for human-driven vehicles.

/// Gap and speed of the vehicle ahead in the same lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    /// Bumper-to-bumper gap (m).
    pub gap_m: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    /// Default desired speed `v0` (m/s); vehicles may carry their own.
    pub desired_speed: f64,
    /// Safe time headway `T` (s).
    pub time_headway_s: f64,
    /// Jam distance `s0` (m).
    pub min_gap_m: f64,
    /// Maximum acceleration `a` (m/s^2).
    pub accel_max: f64,
    /// Comfortable deceleration `b` (m/s^2).
    pub comfortable_decel: f64,
    /// Floor for the returned acceleration (m/s^2, positive magnitude).
    pub emergency_decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 33.3,
            time_headway_s: 1.1,
            min_gap_m: 2.0,
            accel_max: 1.5,
            comfortable_decel: 2.0,
            emergency_decel: 9.0,
        }
    }
}

/// IDM acceleration for a driver wanting `desired_speed`.
///
/// A non-positive gap returns `-emergency_decel`.
pub fn human_accel(leader: Option<Leader>, speed: f64, desired_speed: f64, params: &IdmParams) -> f64 {
    let ratio = if desired_speed > 0.0 { speed / desired_speed } else { 1.0 };
    let r2 = ratio * ratio;
    let free = 1.0 - r2 * r2;
    let a = match leader {
        None => params.accel_max * free,
        Some(l) if l.gap_m <= 0.0 => return -params.emergency_decel,
        Some(l) => {
            let dv = speed - l.speed;
            let s_star = params.min_gap_m
                + (speed * params.time_headway_s
                    + speed * dv / (2.0 * libm::sqrt(params.accel_max * params.comfortable_decel)))
                .max(0.0);
            let inter = s_star / l.gap_m;
            params.accel_max * (free - inter * inter)
        }
    };
    a.max(-params.emergency_decel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_flow_equilibrium() {
        let p = IdmParams::default();
        assert_eq!(human_accel(None, 33.3, 33.3, &p), 0.0);
    }

    #[test]
    fn standing_start() {
        let p = IdmParams::default();
        let far = Leader {
            gap_m: 1e9,
            speed: 30.0,
        };
        assert!((human_accel(Some(far), 0.0, 33.3, &p) - 1.5).abs() < 1e-12);
        assert_eq!(human_accel(None, 0.0, 33.3, &p), 1.5);
    }

    #[test]
    fn formula_example() {
        // a (1 - (30/33.3)^4 - ((2 + 30*1.1)/40)^2), computed independently.
        let p = IdmParams::default();
        let a = human_accel(
            Some(Leader {
                gap_m: 40.0,
                speed: 30.0,
            }),
            30.0,
            33.3,
            &p,
        );
        assert!((a - (-0.636533961217501)).abs() < 1e-12, "{a}");
    }

    #[test]
    fn non_positive_gap_is_emergency() {
        let p = IdmParams::default();
        let a = human_accel(
            Some(Leader {
                gap_m: 0.0,
                speed: 0.0,
            }),
            10.0,
            33.3,
            &p,
        );
        assert_eq!(a, -9.0);
    }

    #[test]
    fn floor_applies() {
        let p = IdmParams::default();
        let a = human_accel(
            Some(Leader {
                gap_m: 1.0,
                speed: 0.0,
            }),
            30.0,
            33.3,
            &p,
        );
        assert_eq!(a, -9.0);
    }
}
