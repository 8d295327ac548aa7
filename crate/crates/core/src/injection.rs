//! The zombie-driver engine.
//!
//! Each injection takes one vehicle at one time `t0`, rotates its heading by
//! one of the configured deviation angles and lets it run straight at its
//! current speed for the distraction time, sampled every `sub_step`. Nobody
//! else reacts: the projection is tested against the factual trajectories of
//! all other vehicles and the static geometry, and the first contact is scored.
//!
//! Injection times come either from a deterministic grid (every `time_step`
//! from the vehicle's first sample, excluding its last sample time) or, when a
//! seed is configured, from a per-vehicle Poisson process.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, WeightedIndex};
use serde::{Deserialize, Serialize};

pub use crate::collision::Partner;
use crate::collision::first_contact;
use crate::dynamics::{absorbed_energy, barrier_energy, obstacle_energy};
use crate::error::{Error, Result};
use crate::geom::{normalize_angle, Vec2};
use crate::model::{state_at, InjectionParams, KinematicState, Scenario, Trajectory, VehicleId};

/// One simulated potential crash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashEvent {
    /// t0, s
    pub injection_time: f64,
    pub vehicle_id: VehicleId,
    /// Index into the configured angle list.
    pub angle_index: usize,
    /// Deviation applied, rad (positive = left).
    pub angle: f64,
    pub partner: Partner,
    pub contact_time: f64,
    /// `contact_time − injection_time`, s; in `(0, ΔT]`.
    pub elapsed: f64,
    pub contact_point: Vec2,
    pub zombie_velocity: Vec2,
    /// Zero for static partners.
    pub partner_velocity: Vec2,
    /// J
    pub energy_total: f64,
    /// Share absorbed by the zombie vehicle, J.
    pub energy_1: f64,
    /// Share absorbed by the partner vehicle, J (0 for static partners).
    pub energy_2: f64,
    /// Closing speed along the impact direction, m/s.
    pub delta_v12_mag: f64,
    /// |Δv| of the zombie vehicle, m/s.
    pub delta_v1_mag: f64,
    /// |Δv| of the partner vehicle, m/s (0 for static partners).
    pub delta_v2_mag: f64,
}

/// Canonical event order: injection time, vehicle id, angle index.
pub fn canonical_sort(events: &mut [CrashEvent]) {
    events.sort_by(|a, b| {
        a.injection_time
            .total_cmp(&b.injection_time)
            .then(a.vehicle_id.cmp(&b.vehicle_id))
            .then(a.angle_index.cmp(&b.angle_index))
    });
}

/// Straight constant-speed projection from `state0`, rotated by `delta_angle`.
///
/// States are produced at `t0 + k·sub_step`, plus a final state at exactly
/// `t0 + duration` when the duration is not a multiple of the sub-step.
pub fn project_zombie(state0: &KinematicState, delta_angle: f64, duration: f64, sub_step: f64) -> Vec<KinematicState> {
    let heading = normalize_angle(state0.heading + delta_angle);
    let velocity = Vec2::from_angle(heading) * state0.speed;
    let steps = (duration / sub_step - 1e-9).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|k| {
            let dt = if k == steps { duration } else { (k as f64 * sub_step).min(duration) };
            KinematicState {
                time: state0.time + dt,
                position: state0.position + velocity * dt,
                speed: state0.speed,
                heading,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub vehicle: VehicleId,
    pub time: f64,
    pub angle_index: usize,
}

/// Deterministic injection times for a vehicle spanning `[start, end]`:
/// `start + k·time_step` for every such time strictly before `end`.
pub fn grid_times(span: (f64, f64), time_step: f64) -> Vec<f64> {
    let (start, end) = span;
    let limit = end - 1e-9 * end.abs().max(1.0);
    (0..)
        .map(|k| start + k as f64 * time_step)
        .take_while(|&t| t < limit)
        .collect()
}

/// Poisson-process schedule over `span` for one vehicle.
///
/// Inter-injection gaps are exponential with `params.rate`; each injection
/// draws its angle from the configured weights. Reproducible from `seed`.
pub fn sample_injections(params: &InjectionParams, span: (f64, f64), seed: u64) -> Result<Vec<(f64, usize)>> {
    if !(params.rate.is_finite() && params.rate > 0.0) {
        return Err(Error::invalid(format!("injection rate must be > 0, got {}", params.rate)));
    }
    let gaps = Exp::new(params.rate).map_err(|e| Error::invalid(e.to_string()))?;
    let angles = WeightedIndex::new(&params.weights).map_err(|e| Error::invalid(format!("angle weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (start, end) = span;
    let mut out = Vec::new();
    let mut t = start;
    loop {
        t += gaps.sample(&mut rng);
        if t >= end {
            break;
        }
        out.push((t, angles.sample(&mut rng)));
    }
    Ok(out)
}

/// Stream seed of one vehicle, so schedules do not depend on vehicle order.
pub fn vehicle_seed(seed: u64, vehicle: VehicleId) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed ^ vehicle.0.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Every injection the parameters call for, in canonical order.
pub fn schedule(scenario: &Scenario, params: &InjectionParams) -> Result<Vec<Injection>> {
    params.validate()?;
    let mut out = Vec::new();
    for traj in &scenario.trajectories {
        let Some(span) = traj.span() else { continue };
        let vehicle = traj.id();
        match params.seed {
            None => {
                for time in grid_times(span, params.time_step) {
                    out.extend((0..params.angles.len()).map(|angle_index| Injection {
                        vehicle,
                        time,
                        angle_index,
                    }));
                }
            }
            Some(seed) => {
                for (time, angle_index) in sample_injections(params, span, vehicle_seed(seed, vehicle))? {
                    out.push(Injection {
                        vehicle,
                        time,
                        angle_index,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.vehicle.cmp(&b.vehicle))
            .then(a.angle_index.cmp(&b.angle_index))
    });
    Ok(out)
}

/// Runs one injection against the factual world.
pub fn simulate_injection(
    scenario: &Scenario,
    others: &[&Trajectory],
    params: &InjectionParams,
    injection: &Injection,
) -> Result<Option<CrashEvent>> {
    let traj = scenario
        .trajectory(injection.vehicle)
        .ok_or_else(|| Error::invalid(format!("unknown vehicle {}", injection.vehicle)))?;
    let Some(state0) = state_at(traj, injection.time) else {
        return Ok(None);
    };
    let angle = params.angles[injection.angle_index];
    let zombie = project_zombie(&state0, angle, params.distraction_time, params.sub_step);
    let Some(contact) = first_contact(&zombie, &traj.vehicle, others, &scenario.geometry) else {
        return Ok(None);
    };

    let mass = traj.vehicle.mass;
    let zombie_velocity = zombie[0].velocity();
    let mut event = CrashEvent {
        injection_time: injection.time,
        vehicle_id: injection.vehicle,
        angle_index: injection.angle_index,
        angle,
        partner: contact.partner,
        contact_time: contact.time,
        elapsed: contact.time - injection.time,
        contact_point: contact.point,
        zombie_velocity,
        partner_velocity: Vec2::ZERO,
        energy_total: 0.0,
        energy_1: 0.0,
        energy_2: 0.0,
        delta_v12_mag: 0.0,
        delta_v1_mag: 0.0,
        delta_v2_mag: 0.0,
    };
    match contact.partner {
        Partner::Vehicle(id) => {
            let partner = scenario
                .trajectory(id)
                .ok_or_else(|| Error::Internal(format!("contact with unknown vehicle {id}")))?;
            let ps = state_at(partner, contact.time)
                .ok_or_else(|| Error::Internal(format!("vehicle {id} absent at contact time {}", contact.time)))?;
            let pv = ps.velocity();
            let k = absorbed_energy(mass, zombie_velocity, partner.vehicle.mass, pv)?;
            event.partner_velocity = pv;
            event.energy_total = k.absorbed_total;
            event.energy_1 = k.absorbed_1;
            event.energy_2 = k.absorbed_2;
            event.delta_v12_mag = k.delta_v12_mag;
            event.delta_v1_mag = k.delta_v1.norm();
            event.delta_v2_mag = k.delta_v2.norm();
        }
        Partner::Barrier(_) => {
            let normal = contact
                .barrier_normal
                .ok_or_else(|| Error::Internal("barrier contact without normal".into()))?;
            let e = barrier_energy(mass, zombie_velocity, normal)?;
            let vn = zombie_velocity.dot(normal).abs();
            event.energy_total = e;
            event.energy_1 = e;
            event.delta_v12_mag = vn;
            event.delta_v1_mag = vn;
        }
        Partner::Obstacle(_) => {
            let e = obstacle_energy(mass, state0.speed)?;
            event.energy_total = e;
            event.energy_1 = e;
            event.delta_v12_mag = state0.speed;
            event.delta_v1_mag = state0.speed;
        }
    }
    Ok(Some(event))
}

/// Runs a schedule and returns the resulting events in canonical order.
pub fn run_schedule(scenario: &Scenario, params: &InjectionParams, injections: &[Injection]) -> Result<Vec<CrashEvent>> {
    params.validate()?;
    let others: Vec<&Trajectory> = scenario.trajectories.iter().collect();
    let run = |inj: &Injection| simulate_injection(scenario, &others, params, inj);

    #[cfg(feature = "parallel")]
    let results: Vec<Result<Option<CrashEvent>>> = {
        use rayon::prelude::*;
        injections.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Option<CrashEvent>>> = injections.iter().map(run).collect();

    let mut events = Vec::new();
    for r in results {
        if let Some(e) = r? {
            events.push(e);
        }
    }
    canonical_sort(&mut events);
    Ok(events)
}

/// Injects every scheduled driver error and returns the crashes.
pub fn inject_all(scenario: &Scenario, params: &InjectionParams) -> Result<Vec<CrashEvent>> {
    let injections = schedule(scenario, params)?;
    run_schedule(scenario, params, &injections)
}

/// [`inject_all`] on a dedicated pool of `workers` threads.
#[cfg(feature = "parallel")]
pub fn inject_all_with_workers(scenario: &Scenario, params: &InjectionParams, workers: usize) -> Result<Vec<CrashEvent>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| inject_all(scenario, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Barrier, StaticGeometry, VehicleAttributes};

    fn st(t: f64, x: f64, y: f64, v: f64, h: f64) -> KinematicState {
        KinematicState::new(t, Vec2::new(x, y), v, h).unwrap()
    }

    #[test]
    fn projection_examples() {
        let s = st(2.0, 10.0, 0.0, 25.0, 0.0);
        let z = project_zombie(&s, 0.0, 5.0, 0.05);
        assert_eq!(z.len(), 101);
        let last = z.last().unwrap();
        assert!((last.position.x - 135.0).abs() < 1e-9);
        assert!((last.time - 7.0).abs() < 1e-12);

        let z = project_zombie(&st(0.0, 3.0, 4.0, 0.0, 1.0), 0.2, 5.0, 0.05);
        assert!(z.iter().all(|s| s.position == Vec2::new(3.0, 4.0)));

        let z = project_zombie(&st(0.0, 0.0, 0.0, 25.0, 0.0), 15f64.to_radians(), 5.0, 0.05);
        let p = z.last().unwrap().position;
        // (125·cos15°, 125·sin15°)
        assert!((p.x - 120.7407).abs() < 1e-3 && (p.y - 32.3524).abs() < 1e-3, "{p:?}");
        assert!(z.iter().all(|s| (s.heading - 15f64.to_radians()).abs() < 1e-15));
    }

    #[test]
    fn projection_ends_exactly_at_duration() {
        let z = project_zombie(&st(1.0, 0.0, 0.0, 10.0, 0.0), 0.0, 1.0, 0.3);
        let times: Vec<f64> = z.iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 5);
        assert!((times[4] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn grid_excludes_final_sample() {
        assert_eq!(grid_times((0.0, 40.0), 1.0).len(), 40);
        assert_eq!(grid_times((0.0, 40.0), 0.5).len(), 80);
        assert_eq!(grid_times((3.0, 3.0), 1.0).len(), 0);
        assert_eq!(grid_times((0.0, 2.5), 1.0), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn empty_scenario_yields_nothing() {
        let sc = Scenario::new(vec![], StaticGeometry::default());
        assert!(inject_all(&sc, &InjectionParams::default()).unwrap().is_empty());
    }

    #[test]
    fn invalid_params_propagate() {
        let sc = Scenario::new(vec![], StaticGeometry::default());
        let p = InjectionParams {
            time_step: 0.0,
            ..InjectionParams::default()
        };
        assert!(inject_all(&sc, &p).is_err());
    }

    #[test]
    fn same_seed_same_schedule() {
        let p = InjectionParams {
            seed: Some(7),
            ..InjectionParams::default()
        };
        let a = sample_injections(&p, (0.0, 100.0), 42).unwrap();
        let b = sample_injections(&p, (0.0, 100.0), 42).unwrap();
        assert_eq!(a, b);
        let c = sample_injections(&p, (0.0, 100.0), 43).unwrap();
        assert_ne!(a, c);
        assert!(a.iter().all(|&(t, i)| (0.0..100.0).contains(&t) && i < 3));
    }

    #[test]
    fn rate_must_be_positive_and_tiny_rate_is_sparse() {
        let p = InjectionParams {
            rate: 0.0,
            ..InjectionParams::default()
        };
        assert!(sample_injections(&p, (0.0, 40.0), 1).is_err());
        let p = InjectionParams {
            rate: 1e-9,
            ..InjectionParams::default()
        };
        let n: usize = (0..100).map(|s| sample_injections(&p, (0.0, 40.0), s).unwrap().len()).sum();
        assert_eq!(n, 0);
    }

    #[test]
    fn poisson_count_matches_rate() {
        // λ = 1/s over 40 s: mean 40, standard error of the mean over 10⁴ runs = √40/100
        let p = InjectionParams {
            rate: 1.0,
            ..InjectionParams::default()
        };
        let runs = 10_000;
        let total: usize = (0..runs).map(|s| sample_injections(&p, (0.0, 40.0), s).unwrap().len()).sum();
        let mean = total as f64 / runs as f64;
        assert!((mean - 40.0).abs() < 3.0 * 40f64.sqrt() / 100.0, "{mean}");
    }

    #[test]
    fn zombie_never_pairs_with_itself() {
        // a single vehicle looping on its own path cannot crash into itself
        let states: Vec<_> = (0..20).map(|i| st(i as f64, 10.0 * i as f64, 0.0, 10.0, 0.0)).collect();
        let sc = Scenario::new(vec![Trajectory::new(VehicleAttributes::car(1), states)], StaticGeometry::default());
        assert!(inject_all(&sc, &InjectionParams::default()).unwrap().is_empty());
    }

    #[test]
    fn static_partner_energy_split() {
        let states: Vec<_> = (0..=10).map(|i| st(i as f64, 25.0 * i as f64, 0.0, 25.0, 0.0)).collect();
        let geometry = StaticGeometry {
            barriers: vec![Barrier {
                points: vec![Vec2::new(-50.0, 3.5), Vec2::new(500.0, 3.5)],
            }],
            obstacles: vec![],
        };
        let sc = Scenario::new(vec![Trajectory::new(VehicleAttributes::car(1), states)], geometry);
        let events = inject_all(&sc, &InjectionParams::default()).unwrap();
        assert_eq!(events.len(), 10);
        for e in &events {
            assert_eq!(e.partner, Partner::Barrier(0));
            assert_eq!(e.energy_2, 0.0);
            assert_eq!(e.energy_total, e.energy_1);
            assert!(e.elapsed > 0.0 && e.elapsed <= 5.0);
            assert_eq!(e.partner_velocity, Vec2::ZERO);
        }
    }
}
