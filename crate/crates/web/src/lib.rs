//! Browser bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string; the page does
//! the drawing.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use zsafe_core::dynamics::absorbed_energy;
use zsafe_core::indicators::{danger_map, z_breakdown, GridSpec, ZSpec};
use zsafe_core::injection::inject_all;
use zsafe_core::scenario_gen::{
    analytic_total_energy_example1, analytic_total_energy_example2, gen_opposing_flow, gen_tree_corridor,
    gen_wall_corridor, Deviation, OpposingFlowSpec, TreeCorridorSpec, WallCorridorSpec,
};
use zsafe_core::ttc::{count_conflicts, TtcParams};
use zsafe_core::{InjectionParams, Scenario, Vec2};

type Res = Result<Value, String>;

fn err(e: zsafe_core::Error) -> String {
    e.to_string()
}

fn params(angle_deg: f64, time_step: f64, distraction_time: f64) -> InjectionParams {
    let side = angle_deg.to_radians();
    InjectionParams {
        time_step,
        distraction_time,
        angles: vec![-side, 0.0, side],
        ..InjectionParams::default()
    }
}

fn xy(p: Vec2) -> [f64; 2] {
    [p.x, p.y]
}

fn paths(sc: &Scenario) -> Vec<Vec<[f64; 2]>> {
    sc.trajectories
        .iter()
        .map(|t| t.states.iter().map(|s| xy(s.position)).collect())
        .collect()
}

/// Wall (`trees = false`) or tree corridor with one vehicle, its crashes and
/// the closed-form total.
pub fn corridor_run(trees: bool, length: f64, speed: f64, angle_deg: f64, time_step: f64, distraction_time: f64) -> Res {
    let p = params(angle_deg, time_step, distraction_time);
    let spec = ZSpec::new(distraction_time, angle_deg, 1.0 / 3.0).map_err(err)?;
    let sc = if trees {
        gen_tree_corridor(&TreeCorridorSpec {
            length,
            speed,
            ..TreeCorridorSpec::default()
        })
    } else {
        gen_wall_corridor(&WallCorridorSpec {
            length,
            speed,
            ..WallCorridorSpec::default()
        })
    }
    .map_err(err)?;
    let events = inject_all(&sc, &p).map_err(err)?;
    let z = z_breakdown(&events, &p, &spec).map_err(err)?;
    let mass = sc.trajectories[0].vehicle.mass;
    let closed_form = if trees {
        analytic_total_energy_example2(length, speed, mass, time_step, 1.0 / 3.0)
    } else {
        analytic_total_energy_example1(length, speed, mass, p.angles[2], time_step, 1.0 / 3.0)
    }
    .map_err(err)?;
    Ok(json!({
        "indicator": spec.name(),
        "vehicle": paths(&sc)[0],
        "barriers": sc.geometry.barriers.iter().map(|b| b.points.iter().map(|&p| xy(p)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "obstacles": sc.geometry.obstacles.iter().map(|o| xy(o.center)).collect::<Vec<_>>(),
        "crashes": events.iter().map(|e| json!({
            "t0": e.injection_time,
            "angle_deg": e.angle.to_degrees(),
            "at": xy(e.contact_point),
            "elapsed_s": e.elapsed,
            "energy_j": e.energy_total,
        })).collect::<Vec<_>>(),
        "raw_total_j": z.raw_total_j,
        "z_j": z.weighted_j,
        "closed_form_j": closed_form,
    }))
}

/// Two-lane road with opposing traffic, optionally bent by a lateral shift:
/// danger map, indicator value and the TTC conflict count.
pub fn opposing_flow_run(seed: u64, flow_per_dir: f64, duration: f64, shift: f64, cell_size: f64) -> Res {
    let spec = OpposingFlowSpec {
        seed,
        flow_per_dir,
        duration,
        deviation: (shift != 0.0).then_some(Deviation {
            position: 100.0,
            angle: 3f64.to_radians(),
            shift,
        }),
        ..OpposingFlowSpec::default()
    };
    let sc = gen_opposing_flow(&spec).map_err(err)?;
    let p = InjectionParams::default();
    let z: ZSpec = "Z5-15-1/3".parse().map_err(err)?;
    let events = inject_all(&sc, &p).map_err(err)?;
    let b = sc.bounds;
    let pad = 10.0;
    let grid = danger_map(
        &events,
        &p,
        &GridSpec {
            origin: Vec2::new(b.min.x - pad, b.min.y - pad),
            cell_size,
            width: b.max.x - b.min.x + 2.0 * pad,
            height: b.max.y - b.min.y + 2.0 * pad,
        },
        &z,
    )
    .map_err(err)?;
    let conflicts = count_conflicts(&sc, &TtcParams::default()).map_err(err)?;
    let zb = z_breakdown(&events, &p, &z).map_err(err)?;
    // one representative path per direction is enough to draw the lanes
    let lanes: Vec<Vec<[f64; 2]>> = [0.0, std::f64::consts::PI]
        .iter()
        .filter_map(|&h| {
            sc.trajectories
                .iter()
                .max_by_key(|t| {
                    let matches = (t.states[0].heading.abs() - h).abs() < 0.5;
                    (matches, t.states.len())
                })
                .map(|t| t.states.iter().map(|s| xy(s.position)).collect())
        })
        .collect();
    Ok(json!({
        "vehicles": sc.trajectories.len(),
        "lanes": lanes,
        "events": events.len(),
        "z_j": zb.weighted_j,
        "ttc_conflicts": conflicts.len(),
        "grid": {
            "origin": xy(grid.origin),
            "cell_size": grid.cell_size,
            "n_cols": grid.n_cols,
            "n_rows": grid.n_rows,
            "energy": grid.energy,
            "overflow_j": grid.overflow_energy,
        },
    }))
}

/// Perfectly inelastic impact of two vehicles.
pub fn impact_run(m1: f64, v1: [f64; 2], m2: f64, v2: [f64; 2]) -> Res {
    let k = absorbed_energy(m1, Vec2::new(v1[0], v1[1]), m2, Vec2::new(v2[0], v2[1])).map_err(err)?;
    serde_json::to_value(k).map_err(|e| e.to_string())
}

fn out(r: Res) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn corridor(trees: bool, length: f64, speed: f64, angle_deg: f64, time_step: f64, distraction_time: f64) -> Result<String, JsValue> {
    out(corridor_run(trees, length, speed, angle_deg, time_step, distraction_time))
}

#[wasm_bindgen]
pub fn opposing_flow(seed: u32, flow_per_dir: f64, duration: f64, shift: f64, cell_size: f64) -> Result<String, JsValue> {
    out(opposing_flow_run(seed as u64, flow_per_dir, duration, shift, cell_size))
}

#[wasm_bindgen]
pub fn impact(m1: f64, v1x: f64, v1y: f64, m2: f64, v2x: f64, v2y: f64) -> Result<String, JsValue> {
    out(impact_run(m1, [v1x, v1y], m2, [v2x, v2y]))
}
