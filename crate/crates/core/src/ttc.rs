//! Time-to-collision conflict counter.
//!
//! A simplified conflict baseline: both vehicles are propagated at their
//! current velocity vectors and their footprints tested every sub-step. It is
//! not equivalent to SSAM (no lane filters or conflict typing) but shares the
//! defining assumption that a conflict requires a collision course.

use serde::{Deserialize, Serialize};

use crate::collision::{footprint, rects_collide};
use crate::error::{Error, Result};
use crate::model::{state_at, KinematicState, Scenario, VehicleAttributes, VehicleId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcParams {
    /// Conflicts are recorded when TTC ≤ threshold, s.
    pub threshold: f64,
    pub sub_step: f64,
    /// Spacing of the evaluation instants, s.
    pub time_step: f64,
}

impl Default for TtcParams {
    fn default() -> Self {
        TtcParams {
            threshold: 1.5,
            sub_step: 0.05,
            time_step: 1.0,
        }
    }
}

impl TtcParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.threshold) || !ok(self.sub_step) || !ok(self.time_step) {
            return Err(Error::invalid(format!(
                "TTC threshold, sub_step and time_step must be > 0 (got {}, {}, {})",
                self.threshold, self.sub_step, self.time_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictEvent {
    /// Evaluation instant at which the minimum TTC was observed, s.
    pub time: f64,
    pub vehicle_a: VehicleId,
    pub vehicle_b: VehicleId,
    /// Minimum TTC over the merged encounter, s.
    pub ttc: f64,
}

/// Smallest sub-step time in `(0, horizon]` at which the constant-velocity
/// projections of `a` and `b` touch.
pub fn ttc_at(
    a: &KinematicState,
    attrs_a: &VehicleAttributes,
    b: &KinematicState,
    attrs_b: &VehicleAttributes,
    horizon: f64,
    sub_step: f64,
) -> Option<f64> {
    let (va, vb) = (a.velocity(), b.velocity());
    let reach = attrs_a.length.hypot(attrs_a.width) / 2.0 + attrs_b.length.hypot(attrs_b.width) / 2.0;
    // closest approach of the centers bounds any possible contact
    let dp = b.position - a.position;
    let dv = vb - va;
    let t_star = if dv.norm_squared() > 0.0 {
        (-dp.dot(dv) / dv.norm_squared()).clamp(0.0, horizon)
    } else {
        0.0
    };
    if (dp + dv * t_star).norm() > reach * (1.0 + 1e-9) {
        return None;
    }

    let steps = (horizon / sub_step - 1e-9).ceil().max(1.0) as usize;
    (1..=steps).find_map(|k| {
        let t = if k == steps { horizon } else { (k as f64 * sub_step).min(horizon) };
        let sa = KinematicState {
            position: a.position + va * t,
            ..*a
        };
        let sb = KinematicState {
            position: b.position + vb * t,
            ..*b
        };
        rects_collide(&footprint(&sa, attrs_a), &footprint(&sb, attrs_b)).then_some(t)
    })
}

/// All TTC conflicts in `scenario`.
///
/// Every pair of vehicles present at an evaluation instant is tested with
/// horizon `threshold`. Conflicts of the same pair at consecutive instants
/// merge into one event keeping the minimum TTC. Output is sorted by time,
/// then by vehicle ids.
pub fn count_conflicts(scenario: &Scenario, params: &TtcParams) -> Result<Vec<ConflictEvent>> {
    params.validate()?;
    let Some((start, end)) = scenario.time_span() else {
        return Ok(Vec::new());
    };
    let trajs = &scenario.trajectories;
    // open encounter per pair: (last step index, event)
    let mut open: std::collections::BTreeMap<(usize, usize), (u64, ConflictEvent)> = Default::default();
    let mut done = Vec::new();

    let mut k: u64 = 0;
    loop {
        let t = start + k as f64 * params.time_step;
        if t > end + 1e-9 {
            break;
        }
        let present: Vec<(usize, KinematicState)> = trajs
            .iter()
            .enumerate()
            .filter_map(|(i, tr)| state_at(tr, t).map(|s| (i, s)))
            .collect();
        for (x, (i, sa)) in present.iter().enumerate() {
            for (j, sb) in &present[x + 1..] {
                let (ta, tb) = (&trajs[*i], &trajs[*j]);
                let Some(ttc) = ttc_at(sa, &ta.vehicle, sb, &tb.vehicle, params.threshold, params.sub_step) else {
                    continue;
                };
                let (ia, ib) = if ta.id() <= tb.id() { (*i, *j) } else { (*j, *i) };
                let ev = ConflictEvent {
                    time: t,
                    vehicle_a: trajs[ia].id(),
                    vehicle_b: trajs[ib].id(),
                    ttc,
                };
                match open.get_mut(&(ia, ib)) {
                    Some((last, cur)) if *last + 1 == k => {
                        *last = k;
                        if ttc < cur.ttc {
                            *cur = ev;
                        }
                    }
                    _ => {
                        if let Some((_, prev)) = open.insert((ia, ib), (k, ev)) {
                            done.push(prev);
                        }
                    }
                }
            }
        }
        k += 1;
    }
    done.extend(open.into_values().map(|(_, e)| e));
    done.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.vehicle_a.cmp(&b.vehicle_a))
            .then(a.vehicle_b.cmp(&b.vehicle_b))
    });
    Ok(done)
}
