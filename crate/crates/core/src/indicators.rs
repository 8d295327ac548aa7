//! Crash-energy indicators.
//!
//! `Z<ΔT>-<deg>-<w>` weights the energy of crashes produced by straight
//! projections with `w` and the energy of each side deviation (±deg) with
//! `(1 − w)/2`. `Z3-15-0.80` is therefore 80% of the straight-trajectory
//! energy plus 10% of each side's, for 3 s distractions.
//!
//! All sums run sequentially in the order the events are given, which is the
//! canonical order produced by the injection engine.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::injection::CrashEvent;
use crate::model::InjectionParams;

const ANGLE_MATCH_TOL: f64 = 1e-9;

/// A parsed indicator name such as `Z5-15-1/3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZSpec {
    pub distraction_time: f64,
    pub angle_deg: f64,
    pub straight_weight: f64,
    label: String,
}

impl ZSpec {
    pub fn new(distraction_time: f64, angle_deg: f64, straight_weight: f64) -> Result<Self> {
        let label = format!("Z{distraction_time}-{angle_deg}-{straight_weight}");
        Self::with_label(distraction_time, angle_deg, straight_weight, label)
    }

    fn with_label(distraction_time: f64, angle_deg: f64, straight_weight: f64, label: String) -> Result<Self> {
        if !(distraction_time.is_finite() && distraction_time > 0.0) {
            return Err(Error::invalid(format!("{label}: distraction time must be > 0")));
        }
        if !(angle_deg.is_finite() && angle_deg > 0.0 && angle_deg < 180.0) {
            return Err(Error::invalid(format!("{label}: angle must be in (0, 180) degrees")));
        }
        if !(0.0..=1.0).contains(&straight_weight) {
            return Err(Error::invalid(format!("{label}: straight weight must be in [0, 1]")));
        }
        Ok(ZSpec {
            distraction_time,
            angle_deg,
            straight_weight,
            label,
        })
    }

    pub fn angle(&self) -> f64 {
        self.angle_deg.to_radians()
    }

    /// Weight of each side deviation, `(1 − w)/2`.
    pub fn side_weight(&self) -> f64 {
        (1.0 - self.straight_weight) / 2.0
    }

    pub fn name(&self) -> &str {
        &self.label
    }

    pub fn classify(&self, angle: f64) -> Result<AngleClass> {
        if angle.abs() <= ANGLE_MATCH_TOL {
            Ok(AngleClass::Straight)
        } else if (angle - self.angle()).abs() <= ANGLE_MATCH_TOL {
            Ok(AngleClass::Left)
        } else if (angle + self.angle()).abs() <= ANGLE_MATCH_TOL {
            Ok(AngleClass::Right)
        } else {
            Err(Error::invalid(format!(
                "{}: deviation of {}° is neither straight nor ±{}°",
                self.label,
                angle.to_degrees(),
                self.angle_deg
            )))
        }
    }

    pub fn weight(&self, class: AngleClass) -> f64 {
        match class {
            AngleClass::Straight => self.straight_weight,
            AngleClass::Left | AngleClass::Right => self.side_weight(),
        }
    }

    /// Checks that events produced with `params` can be scored by this indicator.
    pub fn check_params(&self, params: &InjectionParams) -> Result<()> {
        if (params.distraction_time - self.distraction_time).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "{} needs {} s distractions, events were produced with {} s",
                self.label, self.distraction_time, params.distraction_time
            )));
        }
        for &a in &params.angles {
            self.classify(a)?;
        }
        Ok(())
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().ok()?;
            let d: f64 = d.trim().parse().ok()?;
            (d != 0.0).then(|| n / d)
        }
        None => s.trim().parse().ok(),
    }
}

impl FromStr for ZSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("malformed indicator name {s:?} (expected e.g. Z3-15-0.80)"));
        let body = s.trim().strip_prefix('Z').ok_or_else(bad)?;
        let body = body.strip_prefix('_').unwrap_or(body);
        let mut parts = body.splitn(3, '-');
        let (Some(dt), Some(deg), Some(w)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let dt: f64 = dt.parse().map_err(|_| bad())?;
        let deg: f64 = deg.parse().map_err(|_| bad())?;
        let w = parse_number(w).ok_or_else(bad)?;
        Self::with_label(dt, deg, w, s.trim().to_string())
    }
}

impl fmt::Display for ZSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl Serialize for ZSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label)
    }
}

impl<'de> Deserialize<'de> for ZSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleClass {
    Straight,
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZBreakdown {
    pub name: String,
    /// Unweighted sum over all events, J.
    pub raw_total_j: f64,
    /// The indicator value, J.
    pub weighted_j: f64,
    pub straight_j: f64,
    pub left_j: f64,
    pub right_j: f64,
    pub straight_count: usize,
    pub left_count: usize,
    pub right_count: usize,
}

pub fn z_breakdown(events: &[CrashEvent], params: &InjectionParams, spec: &ZSpec) -> Result<ZBreakdown> {
    spec.check_params(params)?;
    let mut b = ZBreakdown {
        name: spec.name().to_string(),
        raw_total_j: 0.0,
        weighted_j: 0.0,
        straight_j: 0.0,
        left_j: 0.0,
        right_j: 0.0,
        straight_count: 0,
        left_count: 0,
        right_count: 0,
    };
    for e in events {
        b.raw_total_j += e.energy_total;
        match spec.classify(e.angle)? {
            AngleClass::Straight => {
                b.straight_j += e.energy_total;
                b.straight_count += 1;
            }
            AngleClass::Left => {
                b.left_j += e.energy_total;
                b.left_count += 1;
            }
            AngleClass::Right => {
                b.right_j += e.energy_total;
                b.right_count += 1;
            }
        }
    }
    let side = spec.side_weight();
    b.weighted_j = spec.straight_weight * b.straight_j + side * b.left_j + side * b.right_j;
    Ok(b)
}

/// The weighted indicator value in joules.
pub fn z_value(events: &[CrashEvent], params: &InjectionParams, spec: &ZSpec) -> Result<f64> {
    Ok(z_breakdown(events, params, spec)?.weighted_j)
}

/// Count, sum and moments of a sample. Moments are `None` when undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub sum: f64,
    pub mean: Option<f64>,
    /// Unbiased (n − 1) estimator.
    pub variance: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Moments {
    pub fn of(values: impl IntoIterator<Item = f64> + Clone) -> Self {
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut min: Option<f64> = None;
        let mut max: Option<f64> = None;
        for v in values.clone() {
            count += 1;
            sum += v;
            min = Some(min.map_or(v, |m| m.min(v)));
            max = Some(max.map_or(v, |m| m.max(v)));
        }
        let mean = (count > 0).then(|| sum / count as f64);
        let variance = match (mean, count) {
            (Some(m), n) if n > 1 => {
                let ss: f64 = values.into_iter().map(|v| (v - m) * (v - m)).sum();
                Some(ss / (n - 1) as f64)
            }
            _ => None,
        };
        Moments {
            count,
            sum,
            mean,
            variance,
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleBreakdown {
    pub angle_index: usize,
    pub angle_deg: f64,
    pub count: usize,
    pub energy_j: f64,
    pub mean_elapsed_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    /// Per-event total energy.
    pub energy: Moments,
    pub energy_1_sum_j: f64,
    pub energy_2_sum_j: f64,
    /// Time from injection to contact.
    pub elapsed: Moments,
    pub vehicle_crashes: usize,
    pub barrier_crashes: usize,
    pub obstacle_crashes: usize,
    pub per_angle: Vec<AngleBreakdown>,
}

pub fn aggregate_stats(events: &[CrashEvent]) -> Summary {
    let mut per_angle: BTreeMap<usize, (f64, usize, f64, f64)> = BTreeMap::new();
    let (mut vehicle, mut barrier, mut obstacle) = (0, 0, 0);
    let (mut e1, mut e2) = (0.0, 0.0);
    for e in events {
        let row = per_angle.entry(e.angle_index).or_insert((e.angle, 0, 0.0, 0.0));
        row.1 += 1;
        row.2 += e.energy_total;
        row.3 += e.elapsed;
        e1 += e.energy_1;
        e2 += e.energy_2;
        match e.partner {
            crate::collision::Partner::Vehicle(_) => vehicle += 1,
            crate::collision::Partner::Barrier(_) => barrier += 1,
            crate::collision::Partner::Obstacle(_) => obstacle += 1,
        }
    }
    Summary {
        count: events.len(),
        energy: Moments::of(events.iter().map(|e| e.energy_total)),
        energy_1_sum_j: e1,
        energy_2_sum_j: e2,
        elapsed: Moments::of(events.iter().map(|e| e.elapsed)),
        vehicle_crashes: vehicle,
        barrier_crashes: barrier,
        obstacle_crashes: obstacle,
        per_angle: per_angle
            .into_iter()
            .map(|(angle_index, (angle, count, energy, elapsed))| AngleBreakdown {
                angle_index,
                angle_deg: angle.to_degrees(),
                count,
                energy_j: energy,
                mean_elapsed_s: (count > 0).then(|| elapsed / count as f64),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdView {
    pub e_min_j: f64,
    pub count: usize,
    pub total_j: f64,
    pub mean_j: Option<f64>,
}

/// Statistics over the events whose energy is at least `e_min`.
pub fn threshold_view(events: &[CrashEvent], e_min: f64) -> ThresholdView {
    let kept = Moments::of(events.iter().map(|e| e.energy_total).filter(|&v| v >= e_min));
    ThresholdView {
        e_min_j: e_min,
        count: kept.count,
        total_j: kept.sum,
        mean_j: kept.mean,
    }
}

/// Area covered by a danger map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec2,
    pub cell_size: f64,
    pub width: f64,
    pub height: f64,
}

impl GridSpec {
    fn dims(&self) -> Result<(usize, usize)> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.cell_size) {
            return Err(Error::invalid(format!("cell size must be > 0, got {}", self.cell_size)));
        }
        if !ok(self.width) || !ok(self.height) || !self.origin.is_finite() {
            return Err(Error::invalid(format!(
                "degenerate danger-map extent {} × {} m",
                self.width, self.height
            )));
        }
        let cols = (self.width / self.cell_size).ceil() as usize;
        let rows = (self.height / self.cell_size).ceil() as usize;
        Ok((cols.max(1), rows.max(1)))
    }
}

/// Weighted crash energy accumulated per square cell, located by contact point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DangerGrid {
    pub origin: Vec2,
    pub cell_size: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    /// Row-major; row 0 is the row nearest `origin.y`.
    pub energy: Vec<f64>,
    pub counts: Vec<u64>,
    pub overflow_energy: f64,
    pub overflow_count: u64,
}

impl DangerGrid {
    pub fn cell(&self, col: usize, row: usize) -> f64 {
        self.energy[row * self.n_cols + col]
    }

    pub fn count(&self, col: usize, row: usize) -> u64 {
        self.counts[row * self.n_cols + col]
    }

    /// Sum of all cells plus the overflow bucket.
    pub fn total(&self) -> f64 {
        self.energy.iter().sum::<f64>() + self.overflow_energy
    }

    /// `(col, row)` of the cell containing `p`, if inside the grid.
    pub fn locate(&self, p: Vec2) -> Option<(usize, usize)> {
        let c = ((p.x - self.origin.x) / self.cell_size).floor();
        let r = ((p.y - self.origin.y) / self.cell_size).floor();
        (c >= 0.0 && r >= 0.0 && (c as usize) < self.n_cols && (r as usize) < self.n_rows)
            .then_some((c as usize, r as usize))
    }
}

pub fn danger_map(events: &[CrashEvent], params: &InjectionParams, grid: &GridSpec, spec: &ZSpec) -> Result<DangerGrid> {
    spec.check_params(params)?;
    let (n_cols, n_rows) = grid.dims()?;
    let mut out = DangerGrid {
        origin: grid.origin,
        cell_size: grid.cell_size,
        n_cols,
        n_rows,
        energy: vec![0.0; n_cols * n_rows],
        counts: vec![0; n_cols * n_rows],
        overflow_energy: 0.0,
        overflow_count: 0,
    };
    for e in events {
        let w = spec.weight(spec.classify(e.angle)?) * e.energy_total;
        match out.locate(e.contact_point) {
            Some((c, r)) => {
                out.energy[r * n_cols + c] += w;
                out.counts[r * n_cols + c] += 1;
            }
            None => {
                out.overflow_energy += w;
                out.overflow_count += 1;
            }
        }
    }
    Ok(out)
}
