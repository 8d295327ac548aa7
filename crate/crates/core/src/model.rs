//! Shared data model: vehicles, trajectories, static geometry and the
//! injection parameters.
//!
//! Units are SI throughout (m, s, kg, rad, J). Headings follow the
//! mathematical convention, counterclockwise from +x, normalized to `[-π, π)`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{angle_diff, normalize_angle, Vec2};

/// Ratio allowed between speed implied by consecutive positions and the
/// recorded speed before a sample pair is flagged.
pub const KINEMATIC_TOLERANCE_FACTOR: f64 = 2.0;
/// Absolute slack (m/s) added to the kinematic check so that near-stationary
/// vehicles with position noise are not flagged.
pub const KINEMATIC_SLACK_MPS: f64 = 0.5;

pub const DEFAULT_MASS_KG: f64 = 1000.0;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct VehicleId(pub u64);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Car,
    Heavy,
    Custom,
}

impl VehicleClass {
    /// Default (length, width, mass) for the class. `Custom` has no defaults.
    pub fn defaults(self) -> Option<(f64, f64, f64)> {
        match self {
            VehicleClass::Car => Some((4.0, 2.0, DEFAULT_MASS_KG)),
            VehicleClass::Heavy => Some((12.0, 2.5, 15_000.0)),
            VehicleClass::Custom => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Car => "car",
            VehicleClass::Heavy => "heavy",
            VehicleClass::Custom => "custom",
        }
    }
}

impl std::str::FromStr for VehicleClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" => Ok(VehicleClass::Car),
            "heavy" => Ok(VehicleClass::Heavy),
            "custom" => Ok(VehicleClass::Custom),
            other => Err(Error::invalid(format!("unknown vehicle class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleAttributes {
    pub id: VehicleId,
    /// m
    pub length: f64,
    /// m
    pub width: f64,
    /// kg
    pub mass: f64,
    pub class: VehicleClass,
}

impl VehicleAttributes {
    pub fn new(id: VehicleId, length: f64, width: f64, mass: f64, class: VehicleClass) -> Result<Self> {
        let attrs = VehicleAttributes {
            id,
            length,
            width,
            mass,
            class,
        };
        attrs.check()?;
        Ok(attrs)
    }

    /// A passenger car with the class defaults (4 m × 2 m, 1000 kg).
    pub fn car(id: u64) -> Self {
        let (length, width, mass) = VehicleClass::Car.defaults().unwrap();
        VehicleAttributes {
            id: VehicleId(id),
            length,
            width,
            mass,
            class: VehicleClass::Car,
        }
    }

    pub fn check(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.length) || !ok(self.width) || !ok(self.mass) {
            return Err(Error::invalid(format!(
                "vehicle {}: length, width and mass must be positive (got {}, {}, {})",
                self.id, self.length, self.width, self.mass
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    /// s from scenario start
    pub time: f64,
    pub position: Vec2,
    /// m/s, never negative
    pub speed: f64,
    /// rad in `[-π, π)`
    pub heading: f64,
}

impl KinematicState {
    /// Builds a state, normalizing the heading. Negative or non-finite speeds
    /// are rejected.
    pub fn new(time: f64, position: Vec2, speed: f64, heading: f64) -> Result<Self> {
        if !(speed.is_finite() && speed >= 0.0) {
            return Err(Error::invalid(format!("speed must be >= 0, got {speed}")));
        }
        if !time.is_finite() || !position.is_finite() || !heading.is_finite() {
            return Err(Error::invalid("non-finite time, position or heading"));
        }
        Ok(KinematicState {
            time,
            position,
            speed,
            heading: normalize_angle(heading),
        })
    }

    pub fn velocity(&self) -> Vec2 {
        velocity_vector(self)
    }
}

/// `speed · (cos heading, sin heading)`.
pub fn velocity_vector(state: &KinematicState) -> Vec2 {
    Vec2::from_angle(state.heading) * state.speed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub vehicle: VehicleAttributes,
    /// Expected strictly increasing in time; see [`validate_scenario`].
    pub states: Vec<KinematicState>,
}

impl Trajectory {
    pub fn new(vehicle: VehicleAttributes, states: Vec<KinematicState>) -> Self {
        Trajectory { vehicle, states }
    }

    pub fn id(&self) -> VehicleId {
        self.vehicle.id
    }

    /// `(first, last)` sample time, or `None` for an empty trajectory.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.states.first()?.time, self.states.last()?.time))
    }

    pub fn state_at(&self, t: f64) -> Option<KinematicState> {
        state_at(self, t)
    }
}

/// Interpolated state of `trajectory` at time `t`, or `None` when the vehicle
/// is not present at `t`.
///
/// Position and speed are interpolated linearly; heading along the shortest
/// arc. Sample times are returned exactly.
pub fn state_at(trajectory: &Trajectory, t: f64) -> Option<KinematicState> {
    let states = &trajectory.states;
    let first = states.first()?;
    let last = states.last()?;
    if !(t >= first.time && t <= last.time) {
        return None;
    }
    // index of the first sample strictly after t
    let hi = states.partition_point(|s| s.time <= t);
    if hi == 0 {
        return Some(*first);
    }
    let a = &states[hi - 1];
    if a.time == t || hi == states.len() {
        return Some(*a);
    }
    let b = &states[hi];
    let dt = b.time - a.time;
    if dt <= 0.0 {
        return Some(*a);
    }
    let f = (t - a.time) / dt;
    Some(KinematicState {
        time: t,
        position: a.position.lerp(b.position, f),
        speed: (a.speed + (b.speed - a.speed) * f).max(0.0),
        heading: normalize_angle(a.heading + f * angle_diff(a.heading, b.heading)),
    })
}

/// Replaces headings with the direction of motion estimated by central
/// differences of position (one-sided at the ends).
///
/// Samples with no displacement inherit the nearest defined heading, or 0 if
/// the vehicle never moves.
pub fn derive_headings(states: &mut [KinematicState]) {
    let n = states.len();
    if n < 2 {
        return;
    }
    let mut derived: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            let d = states[b].position - states[a].position;
            (d.norm() > 1e-9).then(|| d.y.atan2(d.x))
        })
        .collect();
    let mut last = derived.iter().flatten().next().copied();
    for h in derived.iter_mut() {
        match h {
            Some(v) => last = Some(*v),
            None => *h = last,
        }
    }
    for (s, h) in states.iter_mut().zip(derived) {
        s.heading = normalize_angle(h.unwrap_or(0.0));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    /// Ordered vertices, at least two.
    pub points: Vec<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    /// Effective radius, m.
    pub radius: f64,
}

/// Default effective radius of a point obstacle such as a tree, m.
pub const DEFAULT_OBSTACLE_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StaticGeometry {
    pub barriers: Vec<Barrier>,
    pub obstacles: Vec<Obstacle>,
}

impl StaticGeometry {
    pub fn is_empty(&self) -> bool {
        self.barriers.is_empty() && self.obstacles.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    fn empty() -> Self {
        Bounds {
            min: Vec2::new(f64::INFINITY, f64::INFINITY),
            max: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn include(&mut self, p: Vec2, pad: f64) {
        self.min.x = self.min.x.min(p.x - pad);
        self.min.y = self.min.y.min(p.y - pad);
        self.max.x = self.max.x.max(p.x + pad);
        self.max.y = self.max.y.max(p.y + pad);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Sorted by vehicle id.
    pub trajectories: Vec<Trajectory>,
    pub geometry: StaticGeometry,
    pub bounds: Bounds,
}

impl Scenario {
    /// Builds a scenario whose bounds enclose every sample and every piece of
    /// static geometry.
    pub fn new(trajectories: Vec<Trajectory>, geometry: StaticGeometry) -> Self {
        let mut bounds = Bounds::empty();
        for s in trajectories.iter().flat_map(|t| &t.states) {
            bounds.include(s.position, 0.0);
        }
        for b in &geometry.barriers {
            for &p in &b.points {
                bounds.include(p, 0.0);
            }
        }
        for o in &geometry.obstacles {
            bounds.include(o.center, o.radius);
        }
        if !bounds.min.is_finite() {
            bounds = Bounds {
                min: Vec2::ZERO,
                max: Vec2::ZERO,
            };
        }
        Self::with_bounds(trajectories, geometry, bounds)
    }

    pub fn with_bounds(mut trajectories: Vec<Trajectory>, geometry: StaticGeometry, bounds: Bounds) -> Self {
        trajectories.sort_by_key(|t| t.id());
        Scenario {
            trajectories,
            geometry,
            bounds,
        }
    }

    pub fn trajectory(&self, id: VehicleId) -> Option<&Trajectory> {
        self.trajectories
            .binary_search_by_key(&id, |t| t.id())
            .ok()
            .map(|i| &self.trajectories[i])
    }

    /// Earliest and latest sample time over all vehicles.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        self.trajectories
            .iter()
            .filter_map(Trajectory::span)
            .fold(None, |acc, (a, b)| match acc {
                None => Some((a, b)),
                Some((lo, hi)) => Some((f64::min(lo, a), f64::max(hi, b))),
            })
    }
}

/// The driver-error framework parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionParams {
    /// Spacing of injection times, s.
    pub time_step: f64,
    /// Duration of the simulated distraction, s.
    pub distraction_time: f64,
    /// Deviations relative to the current heading, rad; positive is leftward.
    pub angles: Vec<f64>,
    /// Per-angle weights, summing to 1. Also the angle distribution in
    /// Monte Carlo mode.
    pub weights: Vec<f64>,
    /// Resolution of the contact search, s.
    pub sub_step: f64,
    /// Monte Carlo mode when present.
    pub seed: Option<u64>,
    /// Monte Carlo injection rate per vehicle-second.
    pub rate: f64,
    /// Restitution coefficient; only 0 (perfectly inelastic) is supported.
    pub epsilon: f64,
}

impl Default for InjectionParams {
    fn default() -> Self {
        let side = 15f64.to_radians();
        InjectionParams {
            time_step: 1.0,
            distraction_time: 5.0,
            angles: vec![-side, 0.0, side],
            weights: vec![1.0 / 3.0; 3],
            sub_step: 0.05,
            seed: None,
            rate: 1.0,
            epsilon: 0.0,
        }
    }
}

impl InjectionParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.time_step) {
            return Err(Error::invalid(format!("time_step must be > 0, got {}", self.time_step)));
        }
        if !pos(self.distraction_time) {
            return Err(Error::invalid(format!(
                "distraction_time must be > 0, got {}",
                self.distraction_time
            )));
        }
        if !pos(self.sub_step) || self.sub_step > self.time_step {
            return Err(Error::invalid(format!(
                "sub_step must satisfy 0 < sub_step <= time_step, got {}",
                self.sub_step
            )));
        }
        if self.angles.is_empty() {
            return Err(Error::invalid("at least one angle is required"));
        }
        if self.angles.iter().any(|a| !a.is_finite() || a.abs() >= PI) {
            return Err(Error::invalid("angles must be finite and within (-π, π)"));
        }
        if self.weights.len() != self.angles.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} angles",
                self.weights.len(),
                self.angles.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be non-negative"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights must sum to 1, got {sum}")));
        }
        if self.seed.is_some() && !pos(self.rate) {
            return Err(Error::invalid(format!("injection rate must be > 0, got {}", self.rate)));
        }
        if self.epsilon != 0.0 {
            return Err(Error::NotSupported(format!(
                "restitution coefficient {} (only perfectly inelastic impacts, epsilon = 0, are implemented)",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    NonMonotoneTime,
    KinematicInconsistency,
    OutOfBounds,
    InvalidState,
    InvalidAttributes,
    DuplicateVehicleId,
    InvalidGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub vehicle: Option<VehicleId>,
    pub time: Option<f64>,
    pub message: String,
}

/// Collects every invariant violation in `scenario`. Nothing is rejected;
/// callers decide what to do with the findings.
pub fn validate_scenario(scenario: &Scenario) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for traj in &scenario.trajectories {
        let id = traj.id();
        let diag = |kind, time, message: String| Diagnostic {
            kind,
            vehicle: Some(id),
            time,
            message,
        };
        if !seen.insert(id) {
            out.push(diag(
                DiagnosticKind::DuplicateVehicleId,
                None,
                format!("vehicle id {id} appears more than once"),
            ));
        }
        if let Err(e) = traj.vehicle.check() {
            out.push(diag(DiagnosticKind::InvalidAttributes, None, e.to_string()));
        }
        for s in &traj.states {
            if !(s.speed >= 0.0) || !s.position.is_finite() || !(-PI..PI).contains(&s.heading) {
                out.push(diag(
                    DiagnosticKind::InvalidState,
                    Some(s.time),
                    format!("invalid state (speed {}, heading {})", s.speed, s.heading),
                ));
            }
            if !scenario.bounds.contains(s.position) {
                out.push(diag(
                    DiagnosticKind::OutOfBounds,
                    Some(s.time),
                    format!("position ({}, {}) outside scenario bounds", s.position.x, s.position.y),
                ));
            }
        }
        for w in traj.states.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let dt = b.time - a.time;
            if dt <= 0.0 {
                out.push(diag(
                    DiagnosticKind::NonMonotoneTime,
                    Some(b.time),
                    format!("sample time {} does not increase after {}", b.time, a.time),
                ));
                continue;
            }
            let implied = a.position.distance(b.position) / dt;
            let recorded = 0.5 * (a.speed + b.speed);
            let too_fast = implied > KINEMATIC_TOLERANCE_FACTOR * recorded + KINEMATIC_SLACK_MPS;
            let too_slow = implied < recorded / KINEMATIC_TOLERANCE_FACTOR - KINEMATIC_SLACK_MPS;
            if too_fast || too_slow {
                out.push(diag(
                    DiagnosticKind::KinematicInconsistency,
                    Some(a.time),
                    format!(
                        "implied speed {implied:.3} m/s vs recorded {recorded:.3} m/s over [{}, {}]",
                        a.time, b.time
                    ),
                ));
            }
        }
    }
    for (i, b) in scenario.geometry.barriers.iter().enumerate() {
        if b.points.len() < 2 || b.points.iter().any(|p| !p.is_finite()) {
            out.push(Diagnostic {
                kind: DiagnosticKind::InvalidGeometry,
                vehicle: None,
                time: None,
                message: format!("barrier {i} needs at least two finite vertices"),
            });
        }
    }
    for (i, o) in scenario.geometry.obstacles.iter().enumerate() {
        if !(o.radius >= 0.0) || !o.center.is_finite() {
            out.push(Diagnostic {
                kind: DiagnosticKind::InvalidGeometry,
                vehicle: None,
                time: None,
                message: format!("obstacle {i} has invalid center or radius {}", o.radius),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use proptest::prelude::*;

    use super::*;

    fn st(t: f64, x: f64, y: f64, v: f64, h: f64) -> KinematicState {
        KinematicState::new(t, Vec2::new(x, y), v, h).unwrap()
    }

    fn straight(id: u64, n: usize) -> Trajectory {
        Trajectory::new(
            VehicleAttributes::car(id),
            (0..n).map(|i| st(i as f64, 10.0 * i as f64, 0.0, 10.0, 0.0)).collect(),
        )
    }

    #[test]
    fn velocity_examples() {
        assert_eq!(velocity_vector(&st(0.0, 0.0, 0.0, 0.0, 1.234)), Vec2::ZERO);
        assert_eq!(velocity_vector(&st(0.0, 0.0, 0.0, 25.0, 0.0)), Vec2::new(25.0, 0.0));
        let v = velocity_vector(&st(0.0, 0.0, 0.0, 25.0, FRAC_PI_2));
        assert!(v.x.abs() < 1e-14 && (v.y - 25.0).abs() < 1e-14);
    }

    #[test]
    fn negative_speed_is_rejected() {
        assert!(KinematicState::new(0.0, Vec2::ZERO, -1.0, 0.0).is_err());
    }

    #[test]
    fn state_at_examples() {
        let t = straight(1, 3);
        assert_eq!(state_at(&t, 1.0), Some(t.states[1]));
        assert_eq!(state_at(&t, 2.0), Some(t.states[2]));
        let mid = state_at(&t, 0.5).unwrap();
        assert_eq!(mid.position, Vec2::new(5.0, 0.0));
        assert_eq!(state_at(&t, -0.1), None);
        assert_eq!(state_at(&t, 2.1), None);
    }

    #[test]
    fn heading_interpolates_along_short_arc() {
        let traj = Trajectory::new(
            VehicleAttributes::car(1),
            vec![st(0.0, 0.0, 0.0, 1.0, PI - 0.1), st(1.0, 0.0, 0.0, 1.0, -PI + 0.1)],
        );
        let h = state_at(&traj, 0.25).unwrap().heading;
        assert!((h - (PI - 0.05)).abs() < 1e-12);
        let h = state_at(&traj, 0.75).unwrap().heading;
        assert!((h - (-PI + 0.05)).abs() < 1e-12);
    }

    #[test]
    fn well_formed_scenario_has_no_diagnostics() {
        let sc = Scenario::new(vec![straight(1, 5), straight(2, 5)], StaticGeometry::default());
        assert!(validate_scenario(&sc).is_empty());
    }

    #[test]
    fn duplicated_timestamp_is_reported_once() {
        let mut t = straight(7, 4);
        t.states[2].time = 1.0;
        t.states[2].position = t.states[1].position;
        let sc = Scenario::new(vec![t], StaticGeometry::default());
        let d = validate_scenario(&sc);
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].kind, DiagnosticKind::NonMonotoneTime);
        assert_eq!(d[0].vehicle, Some(VehicleId(7)));
    }

    #[test]
    fn position_jump_is_kinematically_inconsistent() {
        let t = Trajectory::new(
            VehicleAttributes::car(3),
            vec![st(0.0, 0.0, 0.0, 10.0, 0.0), st(1.0, 100.0, 0.0, 10.0, 0.0)],
        );
        let sc = Scenario::new(vec![t], StaticGeometry::default());
        let d = validate_scenario(&sc);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::KinematicInconsistency);
        assert_eq!(d[0].time, Some(0.0));
    }

    #[test]
    fn out_of_bounds_warns() {
        let sc = Scenario::with_bounds(
            vec![straight(1, 3)],
            StaticGeometry::default(),
            Bounds {
                min: Vec2::new(-1.0, -1.0),
                max: Vec2::new(15.0, 1.0),
            },
        );
        let d = validate_scenario(&sc);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::OutOfBounds);
        assert_eq!(d[0].time, Some(2.0));
    }

    #[test]
    fn derived_headings_follow_motion() {
        let mut states = vec![
            st(0.0, 0.0, 0.0, 1.0, 0.0),
            st(1.0, 0.0, 1.0, 1.0, 0.0),
            st(2.0, 0.0, 2.0, 1.0, 0.0),
        ];
        derive_headings(&mut states);
        for s in &states {
            assert!((s.heading - FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        assert!(InjectionParams::default().validate().is_ok());
        let p = InjectionParams { epsilon: 0.3, ..InjectionParams::default() };
        assert!(matches!(p.validate(), Err(Error::NotSupported(_))));
        let p = InjectionParams { sub_step: 2.0, ..InjectionParams::default() };
        assert!(p.validate().is_err());
        let p = InjectionParams { weights: vec![0.5, 0.5, 0.5], ..InjectionParams::default() };
        assert!(p.validate().is_err());
        let mut p = InjectionParams::default();
        p.weights.pop();
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn interpolated_states_are_valid_and_continuous(
            speeds in prop::collection::vec(0.0f64..40.0, 2..8),
            headings in prop::collection::vec(-10.0f64..10.0, 8),
            frac in 0.0f64..1.0,
        ) {
            let states: Vec<_> = speeds.iter().enumerate()
                .map(|(i, &v)| st(i as f64, i as f64 * 3.0, (i as f64).sin(), v, headings[i]))
                .collect();
            let traj = Trajectory::new(VehicleAttributes::car(1), states);
            let end = (speeds.len() - 1) as f64;
            let t = frac * end;
            let s = state_at(&traj, t).unwrap();
            prop_assert!(s.speed >= 0.0);
            prop_assert!((-PI..PI).contains(&s.heading));
            let eps = 1e-7;
            if t + eps <= end {
                let s2 = state_at(&traj, t + eps).unwrap();
                prop_assert!(s.position.distance(s2.position) < 1e-5);
                prop_assert!((s.speed - s2.speed).abs() < 1e-4);
                prop_assert!(angle_diff(s.heading, s2.heading).abs() < 1e-5);
            }
        }

        #[test]
        fn velocity_magnitude_equals_speed(v in 0.0f64..100.0, h in -PI..PI) {
            let s = st(0.0, 0.0, 0.0, v, h);
            let m = velocity_vector(&s).norm();
            prop_assert!((m - v).abs() <= 1e-12 * v.max(1e-300));
        }
    }
}
