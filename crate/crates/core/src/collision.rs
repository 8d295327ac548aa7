//! Oriented-rectangle contact tests and the first-contact search.
//!
//! Two footprints collide when any pair of their sides intersects, or when one
//! lies entirely inside the other. All tests use closed sets: touching counts.

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::model::{state_at, Barrier, KinematicState, StaticGeometry, Trajectory, VehicleAttributes, VehicleId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub center: Vec2,
    pub half_length: f64,
    pub half_width: f64,
    pub heading: f64,
}

impl OrientedRect {
    pub fn new(center: Vec2, half_length: f64, half_width: f64, heading: f64) -> Self {
        debug_assert!(half_length > 0.0 && half_width > 0.0);
        OrientedRect {
            center,
            half_length,
            half_width,
            heading,
        }
    }

    /// Unit vectors along the length and the width (left of heading).
    pub fn axes(&self) -> (Vec2, Vec2) {
        let u = Vec2::from_angle(self.heading);
        (u, u.perp())
    }

    /// Corners in counterclockwise order, starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let (u, n) = self.axes();
        let l = u * self.half_length;
        let w = n * self.half_width;
        let c = self.center;
        [c + l + w, c - l + w, c - l - w, c + l - w]
    }

    pub fn sides(&self) -> [(Vec2, Vec2); 4] {
        let c = self.corners();
        [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    fn local(&self, p: Vec2) -> (f64, f64) {
        let (u, n) = self.axes();
        let d = p - self.center;
        (d.dot(u), d.dot(n))
    }

    /// Closed containment test.
    pub fn contains(&self, p: Vec2) -> bool {
        let (a, b) = self.local(p);
        a.abs() <= self.half_length && b.abs() <= self.half_width
    }

    /// Point of the (filled) rectangle nearest to `p`.
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        if self.contains(p) {
            return p;
        }
        let (u, n) = self.axes();
        let (a, b) = self.local(p);
        self.center
            + u * a.clamp(-self.half_length, self.half_length)
            + n * b.clamp(-self.half_width, self.half_width)
    }
}

/// Footprint of a vehicle in a given state.
pub fn footprint(state: &KinematicState, attrs: &VehicleAttributes) -> OrientedRect {
    OrientedRect::new(state.position, attrs.length / 2.0, attrs.width / 2.0, state.heading)
}

/// Intersection of the closed segments `a1a2` and `b1b2`.
///
/// Crossing or touching segments yield the common point; collinear overlaps
/// yield the midpoint of the overlap.
pub fn segments_intersect(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> Option<Vec2> {
    let da = a2 - a1;
    let db = b2 - b1;
    let o1 = da.cross(b1 - a1);
    let o2 = da.cross(b2 - a1);
    let o3 = db.cross(a1 - b1);
    let o4 = db.cross(a2 - b1);

    let denom = da.cross(db);
    if denom != 0.0 {
        let straddles = |p: f64, q: f64| (p <= 0.0 && q >= 0.0) || (p >= 0.0 && q <= 0.0);
        if !(straddles(o1, o2) && straddles(o3, o4)) {
            return None;
        }
        let t = ((b1 - a1).cross(db) / denom).clamp(0.0, 1.0);
        return Some(a1 + da * t);
    }

    // parallel or degenerate
    if o1 != 0.0 || o2 != 0.0 || o3 != 0.0 || o4 != 0.0 {
        return None;
    }
    collinear_overlap(a1, a2, b1, b2)
}

fn collinear_overlap(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> Option<Vec2> {
    // parametrize along whichever segment is longer
    let (p, q, r, s) = if (a2 - a1).norm_squared() >= (b2 - b1).norm_squared() {
        (a1, a2, b1, b2)
    } else {
        (b1, b2, a1, a2)
    };
    let d = q - p;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        // both segments are points
        return (p == r).then_some(p);
    }
    let tr = (r - p).dot(d) / len2;
    let ts = (s - p).dot(d) / len2;
    let lo = tr.min(ts).max(0.0);
    let hi = tr.max(ts).min(1.0);
    (lo <= hi).then(|| p + d * (0.5 * (lo + hi)))
}

/// Side-intersection points between two rectangles.
fn side_hits(a: &OrientedRect, b: &OrientedRect) -> Vec<Vec2> {
    let mut hits = Vec::new();
    for (a1, a2) in a.sides() {
        for (b1, b2) in b.sides() {
            if let Some(p) = segments_intersect(a1, a2, b1, b2) {
                hits.push(p);
            }
        }
    }
    hits
}

fn far_apart(a: &OrientedRect, b: &OrientedRect) -> bool {
    let reach = a.bounding_radius() + b.bounding_radius();
    (a.center - b.center).norm_squared() > reach * reach * (1.0 + 1e-9)
}

pub fn rects_collide(a: &OrientedRect, b: &OrientedRect) -> bool {
    if far_apart(a, b) {
        return false;
    }
    a.contains(b.center)
        || b.contains(a.center)
        || a.sides()
            .iter()
            .any(|&(a1, a2)| b.sides().iter().any(|&(b1, b2)| segments_intersect(a1, a2, b1, b2).is_some()))
}

/// Representative contact point of two colliding rectangles: the mean of the
/// side intersections, or the center of the contained rectangle.
pub fn rect_contact_point(a: &OrientedRect, b: &OrientedRect) -> Option<Vec2> {
    if far_apart(a, b) {
        return None;
    }
    let hits = side_hits(a, b);
    if !hits.is_empty() {
        return Some(mean(&hits));
    }
    if a.contains(b.center) {
        Some(b.center)
    } else if b.contains(a.center) {
        Some(a.center)
    } else {
        None
    }
}

fn mean(points: &[Vec2]) -> Vec2 {
    let mut acc = Vec2::ZERO;
    for &p in points {
        acc += p;
    }
    acc / points.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierHit {
    pub point: Vec2,
    /// Unit normal of the struck segment, pointing back toward the rectangle.
    pub normal: Vec2,
    pub segment: usize,
}

/// First segment of `polyline` touching `r`.
pub fn rect_hits_barrier(r: &OrientedRect, polyline: &[Vec2]) -> Option<BarrierHit> {
    let reach = r.bounding_radius();
    for (segment, w) in polyline.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        if point_segment_distance(r.center, p, q) > reach * (1.0 + 1e-9) {
            continue;
        }
        let mut hits: Vec<Vec2> = r
            .sides()
            .iter()
            .filter_map(|&(a, b)| segments_intersect(a, b, p, q))
            .collect();
        if hits.is_empty() && r.contains(p) && r.contains(q) {
            hits.push(p.lerp(q, 0.5));
        }
        if hits.is_empty() {
            continue;
        }
        let Some(dir) = (q - p).normalized() else {
            continue;
        };
        let point = mean(&hits);
        let mut normal = dir.perp();
        let side = normal.dot(r.center - point);
        let (u, _) = r.axes();
        if side < 0.0 || (side == 0.0 && normal.dot(u) > 0.0) {
            normal = -normal;
        }
        return Some(BarrierHit { point, normal, segment });
    }
    None
}

fn point_segment_distance(c: Vec2, p: Vec2, q: Vec2) -> f64 {
    let d = q - p;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 { ((c - p).dot(d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    c.distance(p + d * t)
}

/// Contact with a disc obstacle; returns the point of `r` nearest the center.
pub fn rect_hits_point_obstacle(r: &OrientedRect, center: Vec2, radius: f64) -> Option<Vec2> {
    let q = r.closest_point(center);
    (q.distance(center) <= radius).then_some(q)
}

/// What a zombie ran into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Partner {
    Vehicle(VehicleId),
    Barrier(usize),
    Obstacle(usize),
}

impl Partner {
    pub fn kind_str(&self) -> &'static str {
        match self {
            Partner::Vehicle(_) => "vehicle",
            Partner::Barrier(_) => "barrier",
            Partner::Obstacle(_) => "obstacle",
        }
    }

    pub fn index(&self) -> u64 {
        match *self {
            Partner::Vehicle(id) => id.0,
            Partner::Barrier(i) | Partner::Obstacle(i) => i as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactResult {
    pub time: f64,
    pub point: Vec2,
    pub partner: Partner,
    /// Present exactly when the partner is a barrier.
    pub barrier_normal: Option<Vec2>,
}

/// Earliest sub-step at which the projected footprint touches another
/// vehicle's actual footprint, a barrier or an obstacle.
///
/// `zombie` holds the projected states starting at the injection time; the
/// initial state itself is not tested, so reported contacts always lie
/// strictly after it. Trajectories carrying the zombie's own id are skipped.
/// At equal times vehicles win over barriers, barriers over obstacles, and
/// lower ids or indices win within a kind.
pub fn first_contact(
    zombie: &[KinematicState],
    attrs: &VehicleAttributes,
    others: &[&Trajectory],
    geometry: &StaticGeometry,
) -> Option<ContactResult> {
    let (first, last) = (zombie.first()?, zombie.last()?);
    let reach = attrs.length.hypot(attrs.width) / 2.0;

    // broad phase: everything the swept path could possibly touch
    let (lo, hi) = {
        let (a, b) = (first.position, last.position);
        (
            Vec2::new(a.x.min(b.x) - reach, a.y.min(b.y) - reach),
            Vec2::new(a.x.max(b.x) + reach, a.y.max(b.y) + reach),
        )
    };
    let overlaps_box = |min: Vec2, max: Vec2| !(max.x < lo.x || min.x > hi.x || max.y < lo.y || min.y > hi.y);

    let mut vehicles: Vec<&Trajectory> = others
        .iter()
        .copied()
        .filter(|t| t.id() != attrs.id)
        .filter(|t| matches!(t.span(), Some((a, b)) if b >= first.time && a <= last.time))
        .collect();
    vehicles.sort_by_key(|t| t.id());

    let barriers: Vec<(usize, &Barrier)> = geometry
        .barriers
        .iter()
        .enumerate()
        .filter(|(_, b)| {
            b.points.windows(2).any(|w| {
                let (p, q) = (w[0], w[1]);
                overlaps_box(Vec2::new(p.x.min(q.x), p.y.min(q.y)), Vec2::new(p.x.max(q.x), p.y.max(q.y)))
            })
        })
        .collect();

    let obstacles: Vec<usize> = geometry
        .obstacles
        .iter()
        .enumerate()
        .filter(|(_, o)| {
            let r = Vec2::new(o.radius, o.radius);
            overlaps_box(o.center - r, o.center + r)
        })
        .map(|(i, _)| i)
        .collect();

    for z in &zombie[1..] {
        let rect = footprint(z, attrs);
        for traj in &vehicles {
            let Some(s) = state_at(traj, z.time) else {
                continue;
            };
            let other = footprint(&s, &traj.vehicle);
            if let Some(point) = rect_contact_point(&rect, &other) {
                return Some(ContactResult {
                    time: z.time,
                    point,
                    partner: Partner::Vehicle(traj.id()),
                    barrier_normal: None,
                });
            }
        }
        for &(i, b) in &barriers {
            if let Some(hit) = rect_hits_barrier(&rect, &b.points) {
                return Some(ContactResult {
                    time: z.time,
                    point: hit.point,
                    partner: Partner::Barrier(i),
                    barrier_normal: Some(hit.normal),
                });
            }
        }
        for &i in &obstacles {
            let o = &geometry.obstacles[i];
            if let Some(point) = rect_hits_point_obstacle(&rect, o.center, o.radius) {
                return Some(ContactResult {
                    time: z.time,
                    point,
                    partner: Partner::Obstacle(i),
                    barrier_normal: None,
                });
            }
        }
    }
    None
}
