use std::f64::consts::PI;

use proptest::prelude::*;

use zsafe_core::collision::Partner;
use zsafe_core::indicators::{aggregate_stats, danger_map, threshold_view, z_value, GridSpec, ZSpec};
use zsafe_core::injection::{inject_all, CrashEvent};
use zsafe_core::io;
use zsafe_core::scenario_gen::{gen_opposing_flow, gen_wall_corridor, Deviation, OpposingFlowSpec, WallCorridorSpec};
use zsafe_core::ttc::{count_conflicts, TtcParams};
use zsafe_core::{InjectionParams, KinematicState, Scenario, StaticGeometry, Trajectory, Vec2, VehicleAttributes};

fn busy_road(seed: u64, duration: f64) -> Scenario {
    gen_opposing_flow(&OpposingFlowSpec {
        seed,
        duration,
        deviation: Some(Deviation {
            position: 100.0,
            angle: 3f64.to_radians(),
            shift: 3.5,
        }),
        ..OpposingFlowSpec::default()
    })
    .unwrap()
}

fn z() -> ZSpec {
    "Z5-15-1/3".parse().unwrap()
}

/// Applies `p ↦ R(angle)·p + offset` to every state and barrier vertex.
fn transform(sc: &Scenario, angle: f64, offset: Vec2) -> Scenario {
    let map = |p: Vec2| p.rotated(angle) + offset;
    let trajectories = sc
        .trajectories
        .iter()
        .map(|t| {
            Trajectory::new(
                t.vehicle.clone(),
                t.states
                    .iter()
                    .map(|s| KinematicState::new(s.time, map(s.position), s.speed, s.heading + angle).unwrap())
                    .collect(),
            )
        })
        .collect();
    let mut geometry = sc.geometry.clone();
    for b in &mut geometry.barriers {
        for p in &mut b.points {
            *p = map(*p);
        }
    }
    for o in &mut geometry.obstacles {
        o.center = map(o.center);
    }
    Scenario::new(trajectories, geometry)
}

fn key(e: &CrashEvent) -> (u64, u64, usize) {
    (e.injection_time.to_bits(), e.vehicle_id.0, e.angle_index)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn energies_are_frame_invariant(angle in -PI..PI, dx in -1e3..1e3f64, dy in -1e3..1e3f64, seed in 1..1000u64) {
        let params = InjectionParams::default();
        let sc = busy_road(seed, 60.0);
        let a = inject_all(&sc, &params).unwrap();
        let b = inject_all(&transform(&sc, angle, Vec2::new(dx, dy)), &params).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(key(x), key(y));
            prop_assert_eq!(x.partner, y.partner);
            prop_assert!((x.energy_total - y.energy_total).abs() <= 1e-9 * x.energy_total.max(1.0));
        }
    }

    #[test]
    fn wall_corridor_is_frame_invariant(angle in -PI..PI, dx in -1e3..1e3f64, dy in -1e3..1e3f64) {
        let params = InjectionParams::default();
        let sc = gen_wall_corridor(&WallCorridorSpec::default()).unwrap();
        let a = inject_all(&sc, &params).unwrap();
        let b = inject_all(&transform(&sc, angle, Vec2::new(dx, dy)), &params).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.energy_total - y.energy_total).abs() <= 1e-9 * x.energy_total);
        }
    }

    #[test]
    fn raising_the_ttc_threshold_never_loses_conflicts(
        movers in prop::collection::vec((-60.0..60.0f64, -60.0..60.0f64, 0.0..25.0f64, -PI..PI), 2..6),
        t1 in 0.2..3.0f64,
        extra in 0.0..3.0f64,
    ) {
        let trajectories = movers
            .iter()
            .enumerate()
            .map(|(i, &(x, y, v, h))| {
                let vel = Vec2::from_angle(h) * v;
                Trajectory::new(
                    VehicleAttributes::car(i as u64 + 1),
                    (0..=10)
                        .map(|k| KinematicState::new(k as f64, Vec2::new(x, y) + vel * k as f64, v, h).unwrap())
                        .collect(),
                )
            })
            .collect();
        let sc = Scenario::new(trajectories, StaticGeometry::default());
        let count = |threshold| count_conflicts(&sc, &TtcParams { threshold, ..TtcParams::default() }).unwrap().len();
        prop_assert!(count(t1 + extra) >= count(t1));
    }
}

#[test]
fn halving_the_time_step_keeps_every_event() {
    let sc = busy_road(3, 120.0);
    let coarse = InjectionParams::default();
    let fine = InjectionParams {
        time_step: 0.5,
        ..coarse.clone()
    };
    let a = inject_all(&sc, &coarse).unwrap();
    let b = inject_all(&sc, &fine).unwrap();
    assert!(b.len() >= a.len());
    for e in &a {
        let same = b.iter().find(|f| key(f) == key(e)).expect("event lost on the finer grid");
        assert_eq!(same.energy_total, e.energy_total);
    }
}

#[test]
fn no_event_pairs_a_vehicle_with_itself() {
    let events = inject_all(&busy_road(5, 300.0), &InjectionParams::default()).unwrap();
    assert!(!events.is_empty());
    for e in &events {
        assert_ne!(e.partner, Partner::Vehicle(e.vehicle_id));
        assert!(e.elapsed > 0.0 && e.elapsed <= 5.0 + 1e-9);
    }
}

#[test]
fn indicator_identities_on_a_busy_road() {
    let sc = busy_road(11, 300.0);
    let params = InjectionParams::default();
    let events = inject_all(&sc, &params).unwrap();
    let total: f64 = events.iter().map(|e| e.energy_total).sum();

    let zv = z_value(&events, &params, &z()).unwrap();
    assert!((zv - total / 3.0).abs() <= 1e-12 * total);

    let doubled: Vec<CrashEvent> = events
        .iter()
        .map(|e| CrashEvent {
            energy_total: 2.0 * e.energy_total,
            ..e.clone()
        })
        .collect();
    assert!((z_value(&doubled, &params, &z()).unwrap() - 2.0 * zv).abs() <= 1e-12 * zv);

    let grid = GridSpec {
        origin: Vec2::new(0.0, -10.0),
        cell_size: 10.0,
        width: 150.0,
        height: 20.0,
    };
    let map = danger_map(&events, &params, &grid, &z()).unwrap();
    assert!(map.overflow_count > 0, "grid deliberately smaller than the road");
    assert!((map.total() - zv).abs() <= 1e-6 * zv);

    let stats = aggregate_stats(&events);
    let all = threshold_view(&events, 0.0);
    assert_eq!(all.count, stats.count);
    assert_eq!(all.total_j, stats.energy.sum);
    assert!(stats.elapsed.mean.unwrap() <= params.distraction_time);
}

#[test]
fn results_do_not_depend_on_input_row_order() {
    let dir = tempfile::tempdir().unwrap();
    let sc = busy_road(2, 120.0);
    let path = dir.path().join("t.csv");
    io::save_trajectories(&path, &sc.trajectories).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    // interleave vehicles by time, highest id first, as simulator exports do
    let mut shuffled = vec![header];
    let mut rows: Vec<&str> = lines.clone();
    rows.sort_by(|a, b| {
        let f = |l: &str| -> (f64, u64) {
            let mut it = l.split(',');
            (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
        };
        let ((ta, ia), (tb, ib)) = (f(a), f(b));
        ta.total_cmp(&tb).then(ib.cmp(&ia))
    });
    shuffled.extend(rows);
    let reordered = dir.path().join("r.csv");
    std::fs::write(&reordered, shuffled.join("\n") + "\n").unwrap();

    let a = Scenario::new(io::load_trajectories(&path, None).unwrap(), sc.geometry.clone());
    let b = Scenario::new(io::load_trajectories(&reordered, None).unwrap(), sc.geometry.clone());
    let params = InjectionParams::default();
    assert_eq!(inject_all(&a, &params).unwrap(), inject_all(&b, &params).unwrap());
    assert_eq!(inject_all(&a, &params).unwrap(), inject_all(&sc, &params).unwrap());
}

#[test]
fn conflicts_ignore_vehicle_labels() {
    let sc = busy_road(4, 120.0);
    let params = TtcParams {
        threshold: 4.0,
        ..TtcParams::default()
    };
    let relabeled = Scenario::new(
        sc.trajectories
            .iter()
            .map(|t| {
                let mut v = t.vehicle.clone();
                v.id.0 = 10_000 - v.id.0;
                Trajectory::new(v, t.states.clone())
            })
            .collect(),
        sc.geometry.clone(),
    );
    let a = count_conflicts(&sc, &params).unwrap();
    let b = count_conflicts(&relabeled, &params).unwrap();
    assert_eq!(a.len(), b.len());
}

#[test]
fn disjoint_corridors_never_conflict() {
    // parallel same-direction lanes 5 m apart, different speeds
    let lane = |id: u64, y: f64, v: f64| {
        Trajectory::new(
            VehicleAttributes::car(id),
            (0..=30)
                .map(|k| KinematicState::new(k as f64, Vec2::new(v * k as f64, y), v, 0.0).unwrap())
                .collect(),
        )
    };
    let sc = Scenario::new(vec![lane(1, 0.0, 30.0), lane(2, 5.0, 10.0), lane(3, -5.0, 20.0)], StaticGeometry::default());
    for threshold in [0.5, 1.5, 5.0, 30.0] {
        let c = count_conflicts(&sc, &TtcParams { threshold, ..TtcParams::default() }).unwrap();
        assert!(c.is_empty());
    }
}
