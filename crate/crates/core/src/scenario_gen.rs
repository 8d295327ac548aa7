//! Synthetic scenarios: the single-vehicle wall and tree corridors with their
//! closed-form energy totals, and a two-way road with seeded traffic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::injection::vehicle_seed;
use crate::model::{
    Barrier, KinematicState, Obstacle, Scenario, StaticGeometry, Trajectory, VehicleAttributes, VehicleId,
    DEFAULT_OBSTACLE_RADIUS,
};

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be > 0, got {v}")))
    }
}

/// One vehicle driving along +x from `x = 0` at `t = 0` until `x = length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallCorridorSpec {
    pub length: f64,
    pub speed: f64,
    pub mass: f64,
    /// Lateral position of the vehicle, m.
    pub lane_offset: f64,
    /// Walls run along `y = ±wall_offset`.
    pub wall_offset: f64,
    /// Extra wall length before x = 0 and after x = length, m.
    pub margin: f64,
    pub sample_step: f64,
}

impl Default for WallCorridorSpec {
    fn default() -> Self {
        WallCorridorSpec {
            length: 1000.0,
            speed: 25.0,
            mass: 1000.0,
            lane_offset: 0.0,
            wall_offset: 3.5,
            margin: 0.0,
            sample_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeCorridorSpec {
    pub length: f64,
    pub speed: f64,
    pub mass: f64,
    pub lane_offset: f64,
    pub tree_spacing: f64,
    /// Trees stand along `y = ±tree_offset`.
    pub tree_offset: f64,
    pub tree_radius: f64,
    /// Extra planted length before x = 0 and after x = length, m.
    pub margin: f64,
    pub sample_step: f64,
}

impl Default for TreeCorridorSpec {
    fn default() -> Self {
        TreeCorridorSpec {
            length: 1000.0,
            speed: 25.0,
            mass: 1000.0,
            lane_offset: 0.0,
            tree_spacing: 5.0,
            tree_offset: 3.5,
            tree_radius: DEFAULT_OBSTACLE_RADIUS,
            margin: 0.0,
            sample_step: 1.0,
        }
    }
}

fn corridor_vehicle(length: f64, speed: f64, mass: f64, lane_offset: f64, sample_step: f64) -> Result<Trajectory> {
    positive("length", length)?;
    positive("speed", speed)?;
    positive("mass", mass)?;
    positive("sample_step", sample_step)?;
    let attrs = VehicleAttributes {
        mass,
        ..VehicleAttributes::car(1)
    };
    let duration = length / speed;
    let mut times: Vec<f64> = (0..)
        .map(|k| k as f64 * sample_step)
        .take_while(|&t| t < duration - 1e-9 * duration)
        .collect();
    times.push(duration);
    let states = times
        .into_iter()
        .map(|t| KinematicState::new(t, Vec2::new(speed * t, lane_offset), speed, 0.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::new(attrs, states))
}

pub fn gen_wall_corridor(spec: &WallCorridorSpec) -> Result<Scenario> {
    let vehicle = corridor_vehicle(spec.length, spec.speed, spec.mass, spec.lane_offset, spec.sample_step)?;
    if !(spec.margin >= 0.0) {
        return Err(Error::invalid("margin must be >= 0"));
    }
    if !(spec.wall_offset - spec.lane_offset.abs() > vehicle.vehicle.width / 2.0) {
        return Err(Error::invalid(format!(
            "walls at ±{} m leave no room for a vehicle at y = {}",
            spec.wall_offset, spec.lane_offset
        )));
    }
    let (x0, x1) = (-spec.margin, spec.length + spec.margin);
    let wall = |y: f64| Barrier {
        points: vec![Vec2::new(x0, y), Vec2::new(x1, y)],
    };
    let geometry = StaticGeometry {
        barriers: vec![wall(spec.wall_offset), wall(-spec.wall_offset)],
        obstacles: vec![],
    };
    Ok(Scenario::new(vec![vehicle], geometry))
}

pub fn gen_tree_corridor(spec: &TreeCorridorSpec) -> Result<Scenario> {
    let vehicle = corridor_vehicle(spec.length, spec.speed, spec.mass, spec.lane_offset, spec.sample_step)?;
    positive("tree_spacing", spec.tree_spacing)?;
    if !(spec.margin >= 0.0) || !(spec.tree_radius >= 0.0) {
        return Err(Error::invalid("margin and tree_radius must be >= 0"));
    }
    if !(spec.tree_offset - spec.tree_radius - spec.lane_offset.abs() > vehicle.vehicle.width / 2.0) {
        return Err(Error::invalid(format!(
            "trees at ±{} m leave no room for a vehicle at y = {}",
            spec.tree_offset, spec.lane_offset
        )));
    }
    let first = (-spec.margin / spec.tree_spacing - 1e-9).ceil() as i64;
    let last = ((spec.length + spec.margin) / spec.tree_spacing + 1e-9).floor() as i64;
    let mut obstacles = Vec::new();
    for k in first..=last {
        let x = k as f64 * spec.tree_spacing;
        for y in [spec.tree_offset, -spec.tree_offset] {
            obstacles.push(Obstacle {
                center: Vec2::new(x, y),
                radius: spec.tree_radius,
            });
        }
    }
    let geometry = StaticGeometry {
        barriers: vec![],
        obstacles,
    };
    Ok(Scenario::new(vec![vehicle], geometry))
}

/// A lateral shift of the whole road, as a straight ramp of slope `angle`
/// centered on `position`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deviation {
    /// x of the ramp midpoint, m.
    pub position: f64,
    /// Ramp angle, rad.
    pub angle: f64,
    /// Total lateral shift, m.
    pub shift: f64,
}

/// Two-way road along x with one lane per direction (driving on the right).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpposingFlowSpec {
    pub length: f64,
    /// Distance between the two lane centerlines, m.
    pub lateral_gap: f64,
    /// veh/h in each direction.
    pub flow_per_dir: f64,
    pub speed: f64,
    /// Simulated period of vehicle arrivals, s.
    pub duration: f64,
    pub seed: u64,
    pub deviation: Option<Deviation>,
    /// Smallest allowed entry headway, s.
    pub min_headway: f64,
    pub sample_step: f64,
}

impl Default for OpposingFlowSpec {
    fn default() -> Self {
        OpposingFlowSpec {
            length: 200.0,
            lateral_gap: 3.5,
            flow_per_dir: 500.0,
            speed: 50.0 / 3.6,
            duration: 900.0,
            seed: 1,
            deviation: None,
            min_headway: 1.0,
            sample_step: 1.0,
        }
    }
}

/// Piecewise-linear path with arc-length lookup.
struct Path {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl Path {
    fn new(points: Vec<Vec2>) -> Self {
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + w[0].distance(w[1]));
        }
        Path { points, cumulative }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Position and heading at arc length `s`.
    fn at(&self, s: f64) -> (Vec2, f64) {
        let n = self.points.len();
        let i = self.cumulative.partition_point(|&c| c <= s).clamp(1, n - 1);
        let (a, b) = (self.points[i - 1], self.points[i]);
        let seg = self.cumulative[i] - self.cumulative[i - 1];
        let f = if seg > 0.0 { ((s - self.cumulative[i - 1]) / seg).clamp(0.0, 1.0) } else { 0.0 };
        let d = b - a;
        (a.lerp(b, f), d.y.atan2(d.x))
    }
}

fn centerline(spec: &OpposingFlowSpec) -> Result<Vec<Vec2>> {
    let Some(dev) = spec.deviation else {
        return Ok(vec![Vec2::new(0.0, 0.0), Vec2::new(spec.length, 0.0)]);
    };
    if !(dev.angle.is_finite() && dev.angle.abs() > 0.0 && dev.angle.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::invalid(format!("deviation angle must be in (0, 90°), got {} rad", dev.angle)));
    }
    let half_run = dev.shift.abs() / dev.angle.abs().tan() / 2.0;
    let (x1, x2) = (dev.position - half_run, dev.position + half_run);
    if !(x1 > 0.0 && x2 < spec.length) {
        return Err(Error::invalid(format!(
            "deviation ramp [{x1:.1}, {x2:.1}] m does not fit on a {} m road",
            spec.length
        )));
    }
    let shift = dev.shift.abs() * dev.angle.signum();
    Ok(vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(x1, 0.0),
        Vec2::new(x2, shift),
        Vec2::new(spec.length, shift),
    ])
}

fn entry_times(spec: &OpposingFlowSpec, stream: u64) -> Result<Vec<f64>> {
    let mean = 3600.0 / spec.flow_per_dir;
    if !(spec.min_headway >= 0.0 && spec.min_headway < mean) {
        return Err(Error::invalid(format!(
            "min_headway {} s must be below the mean headway {mean} s",
            spec.min_headway
        )));
    }
    let gaps = Exp::new(1.0 / (mean - spec.min_headway)).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(vehicle_seed(spec.seed, VehicleId(stream)));
    let mut out = Vec::new();
    let mut t = gaps.sample(&mut rng);
    while t < spec.duration {
        out.push(t);
        t += spec.min_headway + gaps.sample(&mut rng);
    }
    Ok(out)
}

/// Constant-speed traffic in both directions with shifted-exponential entry
/// headways (mean `3600/flow`, never below `min_headway`).
pub fn gen_opposing_flow(spec: &OpposingFlowSpec) -> Result<Scenario> {
    positive("length", spec.length)?;
    positive("lateral_gap", spec.lateral_gap)?;
    positive("flow_per_dir", spec.flow_per_dir)?;
    positive("speed", spec.speed)?;
    positive("duration", spec.duration)?;
    positive("sample_step", spec.sample_step)?;

    let center = centerline(spec)?;
    let half = spec.lateral_gap / 2.0;
    let east = Path::new(center.iter().map(|p| *p - Vec2::new(0.0, half)).collect());
    let west = Path::new(center.iter().rev().map(|p| *p + Vec2::new(0.0, half)).collect());

    let mut arrivals: Vec<(f64, u8)> = Vec::new();
    arrivals.extend(entry_times(spec, 0)?.into_iter().map(|t| (t, 0)));
    arrivals.extend(entry_times(spec, 1)?.into_iter().map(|t| (t, 1)));
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut trajectories = Vec::with_capacity(arrivals.len());
    for (n, &(entry, dir)) in arrivals.iter().enumerate() {
        let path = if dir == 0 { &east } else { &west };
        let travel = path.length() / spec.speed;
        let mut offsets: Vec<f64> = (0..)
            .map(|k| k as f64 * spec.sample_step)
            .take_while(|&dt| dt < travel - 1e-9)
            .collect();
        offsets.push(travel);
        let states = offsets
            .into_iter()
            .map(|dt| {
                let (p, h) = path.at(spec.speed * dt);
                KinematicState::new(entry + dt, p, spec.speed, h)
            })
            .collect::<Result<Vec<_>>>()?;
        trajectories.push(Trajectory::new(VehicleAttributes::car(n as u64 + 1), states));
    }
    Ok(Scenario::new(trajectories, StaticGeometry::default()))
}

fn check_analytic(length: f64, speed: f64, mass: f64, dt: f64, w: f64) -> Result<()> {
    positive("length", length)?;
    positive("speed", speed)?;
    positive("mass", mass)?;
    positive("time step", dt)?;
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::invalid(format!("straight weight must be in [0, 1], got {w}")));
    }
    Ok(())
}

/// Closed-form indicator value of the wall corridor: `L/(v·δt)` injection
/// positions, two side crashes each at `½·m·(v·sinθ)²`, weighted `(1 − w)/2`.
pub fn analytic_total_energy_example1(length: f64, speed: f64, mass: f64, theta: f64, dt: f64, w: f64) -> Result<f64> {
    check_analytic(length, speed, mass, dt, w)?;
    if !(0.0..std::f64::consts::PI).contains(&theta) {
        return Err(Error::invalid(format!("angle must be in [0, π), got {theta}")));
    }
    let vn = speed * theta.sin();
    Ok(length / (speed * dt) * 2.0 * 0.5 * mass * vn * vn * (1.0 - w) / 2.0)
}

/// Closed-form indicator value of the tree corridor: two side crashes per
/// position, each absorbing the full kinetic energy `½·m·v²`.
pub fn analytic_total_energy_example2(length: f64, speed: f64, mass: f64, dt: f64, w: f64) -> Result<f64> {
    check_analytic(length, speed, mass, dt, w)?;
    Ok(length / (speed * dt) * 2.0 * 0.5 * mass * speed * speed * (1.0 - w) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wall_corridor_defaults() {
        let sc = gen_wall_corridor(&WallCorridorSpec::default()).unwrap();
        assert_eq!(sc.trajectories.len(), 1);
        let t = &sc.trajectories[0];
        assert_eq!(t.states.len(), 41);
        assert_eq!(t.states[40].position, Vec2::new(1000.0, 0.0));
        assert_eq!(sc.geometry.barriers.len(), 2);
        assert!(crate::model::validate_scenario(&sc).is_empty());
    }

    #[test]
    fn invalid_corridors_are_rejected() {
        let bad = WallCorridorSpec {
            length: 0.0,
            ..Default::default()
        };
        assert!(gen_wall_corridor(&bad).is_err());
        let narrow = WallCorridorSpec {
            wall_offset: 0.9,
            ..Default::default()
        };
        assert!(gen_wall_corridor(&narrow).is_err());
        let bad = TreeCorridorSpec {
            tree_spacing: 0.0,
            ..Default::default()
        };
        assert!(gen_tree_corridor(&bad).is_err());
    }

    #[test]
    fn wall_reach_bound() {
        // a 15° projection covers 25·sin15°·5 = 32.35 m laterally, far more than 3.5 m
        let reach = 25.0 * 15f64.to_radians().sin() * 5.0;
        assert!((reach - 32.352).abs() < 1e-3);
        assert!(reach > WallCorridorSpec::default().wall_offset);
    }

    #[test]
    fn tree_corridor_counts() {
        let sc = gen_tree_corridor(&TreeCorridorSpec::default()).unwrap();
        assert_eq!(sc.geometry.obstacles.len(), 2 * (1000 / 5 + 1));
        let sc = gen_tree_corridor(&TreeCorridorSpec {
            margin: 50.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(sc.geometry.obstacles.len(), 2 * (1100 / 5 + 1));
    }

    #[test]
    fn opposing_flow_is_seed_reproducible_and_straight() {
        let spec = OpposingFlowSpec::default();
        let a = gen_opposing_flow(&spec).unwrap();
        let b = gen_opposing_flow(&spec).unwrap();
        assert_eq!(a, b);
        let c = gen_opposing_flow(&OpposingFlowSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a, c);
        for s in a.trajectories.iter().flat_map(|t| &t.states) {
            assert!(s.heading == 0.0 || s.heading == -std::f64::consts::PI, "{}", s.heading);
        }
        assert!(crate::model::validate_scenario(&a).is_empty());
    }

    #[test]
    fn deviated_road_shifts_both_lanes() {
        let spec = OpposingFlowSpec {
            deviation: Some(Deviation {
                position: 100.0,
                angle: 3f64.to_radians(),
                shift: 3.5,
            }),
            ..Default::default()
        };
        let sc = gen_opposing_flow(&spec).unwrap();
        let ends: Vec<f64> = sc.trajectories.iter().map(|t| t.states[0].position.y).collect();
        assert!(ends.iter().all(|&y| (y + 1.75).abs() < 1e-9 || (y - 5.25).abs() < 1e-9), "{ends:?}");
        assert!(crate::model::validate_scenario(&sc).is_empty());
        let too_long = OpposingFlowSpec {
            deviation: Some(Deviation {
                position: 100.0,
                angle: 0.1f64.to_radians(),
                shift: 3.5,
            }),
            ..Default::default()
        };
        assert!(gen_opposing_flow(&too_long).is_err());
    }

    #[test]
    fn occupancy_follows_littles_law() {
        // 500 veh/h × (200 m / 13.9 m/s) = 2 vehicles per direction on average
        let spec = OpposingFlowSpec {
            duration: 36_000.0,
            seed: 11,
            ..Default::default()
        };
        let sc = gen_opposing_flow(&spec).unwrap();
        let expected = spec.flow_per_dir / 3600.0 * spec.length / spec.speed;
        assert!((expected - 2.0).abs() < 1e-9);
        let (mut present, mut samples) = (0usize, 0usize);
        let mut t = 1000.0;
        while t < spec.duration - 100.0 {
            present += sc.trajectories.iter().filter(|tr| tr.state_at(t).is_some()).count();
            samples += 1;
            t += 0.5;
        }
        let per_dir = present as f64 / samples as f64 / 2.0;
        assert!((per_dir - expected).abs() < 0.1, "{per_dir}");
    }

    #[test]
    fn analytic_examples() {
        let third = 1.0 / 3.0;
        let z1 = analytic_total_energy_example1(1000.0, 25.0, 1000.0, 15f64.to_radians(), 1.0, third).unwrap();
        assert!((z1 - 1_674_682.0 / 3.0).abs() < 1.0, "{z1}");
        let z2 = analytic_total_energy_example2(1000.0, 25.0, 1000.0, 1.0, third).unwrap();
        assert!((z2 - 25_000_000.0 / 3.0).abs() < 1e-6);
        assert_eq!(analytic_total_energy_example1(1000.0, 25.0, 1000.0, 0.0, 1.0, third).unwrap(), 0.0);
        let half = analytic_total_energy_example1(1000.0, 25.0, 1000.0, 0.3, 2.0, third).unwrap();
        let full = analytic_total_energy_example1(1000.0, 25.0, 1000.0, 0.3, 1.0, third).unwrap();
        assert!((2.0 * half - full).abs() < 1e-9 * full);
        assert!(analytic_total_energy_example2(1000.0, 25.0, 1000.0, 0.0, third).is_err());
    }
}
