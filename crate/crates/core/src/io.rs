//! Delimited-text file formats.
//!
//! Trajectory table (header-declared columns, any order):
//!
//! ```text
//! time_s,vehicle_id,x_m,y_m,speed_mps[,heading_rad]
//! ```
//!
//! `speed_kmh` may replace `speed_mps`; values are converted on load. A
//! missing heading column is derived from the positions.
//!
//! Vehicle table: `vehicle_id,class,length_m,width_m,mass_kg`.
//!
//! Geometry table: `kind,id,x_m,y_m,radius_m`, where `kind` is `barrier`
//! (one row per vertex, vertices in file order, barriers ordered by id) or
//! `obstacle` (radius defaults to 0.25 m when empty).
//!
//! Floats are written with the shortest representation that round-trips.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::collision::Partner;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::indicators::DangerGrid;
use crate::injection::CrashEvent;
use crate::model::{
    derive_headings, Barrier, KinematicState, Obstacle, StaticGeometry, Trajectory, VehicleAttributes, VehicleClass,
    VehicleId, DEFAULT_OBSTACLE_RADIUS,
};
use crate::ttc::ConflictEvent;

const KMH: f64 = 1.0 / 3.6;

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(path, line, format!("{other:?}")),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(f))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

struct Columns {
    names: Vec<String>,
}

impl Columns {
    fn new(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Self> {
        let names = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(|s| s.to_ascii_lowercase()).collect();
        Ok(Columns { names })
    }

    fn find(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn require(&self, path: &Path, name: &str) -> Result<usize> {
        self.find(name).ok_or_else(|| parse_err(path, 1, format!("missing column {name:?}")))
    }
}

fn field<'a>(path: &Path, rec: &'a csv::StringRecord, idx: usize, name: &str) -> Result<&'a str> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    rec.get(idx).ok_or_else(|| parse_err(path, line, format!("missing field {name}")))
}

fn number(path: &Path, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    let s = field(path, rec, idx, name)?;
    let v: f64 = s.parse().map_err(|_| parse_err(path, line, format!("{name}: not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{name}: non-finite value")));
    }
    Ok(v)
}

fn integer(path: &Path, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<u64> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    let s = field(path, rec, idx, name)?;
    s.parse().map_err(|_| parse_err(path, line, format!("{name}: not a non-negative integer: {s:?}")))
}

pub fn load_vehicles(path: &Path) -> Result<BTreeMap<VehicleId, VehicleAttributes>> {
    let mut rdr = reader(path)?;
    let cols = Columns::new(path, &mut rdr)?;
    let id_c = cols.require(path, "vehicle_id")?;
    let class_c = cols.find("class");
    let (len_c, wid_c, mass_c) = (cols.find("length_m"), cols.find("width_m"), cols.find("mass_kg"));
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let id = VehicleId(integer(path, &rec, id_c, "vehicle_id")?);
        let class: VehicleClass = match class_c {
            Some(c) if !field(path, &rec, c, "class")?.is_empty() => field(path, &rec, c, "class")?
                .parse()
                .map_err(|e: Error| parse_err(path, line, e.to_string()))?,
            _ => VehicleClass::Car,
        };
        let defaults = class.defaults();
        let pick = |col: Option<usize>, name: &str, default: Option<f64>| -> Result<f64> {
            match col {
                Some(c) if !field(path, &rec, c, name)?.is_empty() => number(path, &rec, c, name),
                _ => default.ok_or_else(|| parse_err(path, line, format!("{name} is required for class {}", class.as_str()))),
            }
        };
        let attrs = VehicleAttributes::new(
            id,
            pick(len_c, "length_m", defaults.map(|d| d.0))?,
            pick(wid_c, "width_m", defaults.map(|d| d.1))?,
            pick(mass_c, "mass_kg", defaults.map(|d| d.2))?,
            class,
        )
        .map_err(|e| parse_err(path, line, e.to_string()))?;
        if out.insert(id, attrs).is_some() {
            return Err(parse_err(path, line, format!("duplicate vehicle id {id}")));
        }
    }
    Ok(out)
}

/// Loads a trajectory table, attaching attributes from `vehicles` (every id in
/// the states must appear there) or car defaults when no table is given.
pub fn load_trajectories(path: &Path, vehicles: Option<&BTreeMap<VehicleId, VehicleAttributes>>) -> Result<Vec<Trajectory>> {
    let mut rdr = reader(path)?;
    let cols = Columns::new(path, &mut rdr)?;
    let t_c = cols.require(path, "time_s")?;
    let id_c = cols.require(path, "vehicle_id")?;
    let x_c = cols.require(path, "x_m")?;
    let y_c = cols.require(path, "y_m")?;
    let (speed_c, scale) = match (cols.find("speed_mps"), cols.find("speed_kmh")) {
        (Some(c), None) => (c, 1.0),
        (None, Some(c)) => (c, KMH),
        (Some(_), Some(_)) => return Err(parse_err(path, 1, "both speed_mps and speed_kmh declared")),
        (None, None) => return Err(parse_err(path, 1, "missing speed column (speed_mps or speed_kmh)")),
    };
    let heading_c = cols.find("heading_rad");

    let mut states: BTreeMap<VehicleId, Vec<KinematicState>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let id = VehicleId(integer(path, &rec, id_c, "vehicle_id")?);
        if let Some(v) = vehicles {
            if !v.contains_key(&id) {
                return Err(parse_err(path, line, format!("vehicle id {id} not in the vehicle table")));
            }
        }
        let speed = number(path, &rec, speed_c, "speed")? * scale;
        if speed < 0.0 {
            return Err(parse_err(path, line, format!("negative speed {speed} for vehicle {id}")));
        }
        let heading = match heading_c {
            Some(c) => number(path, &rec, c, "heading_rad")?,
            None => 0.0,
        };
        let state = KinematicState::new(
            number(path, &rec, t_c, "time_s")?,
            Vec2::new(number(path, &rec, x_c, "x_m")?, number(path, &rec, y_c, "y_m")?),
            speed,
            heading,
        )
        .map_err(|e| parse_err(path, line, e.to_string()))?;
        let samples = states.entry(id).or_default();
        if let Some(prev) = samples.last() {
            if state.time <= prev.time {
                return Err(parse_err(
                    path,
                    line,
                    format!("vehicle {id}: time {} does not follow {}", state.time, prev.time),
                ));
            }
        }
        samples.push(state);
    }
    if heading_c.is_none() {
        log::info!("{}: no heading_rad column, deriving headings from positions", path.display());
        for s in states.values_mut() {
            derive_headings(s);
        }
    }
    Ok(states
        .into_iter()
        .map(|(id, s)| {
            let attrs = vehicles
                .and_then(|v| v.get(&id).cloned())
                .unwrap_or_else(|| VehicleAttributes::car(id.0));
            Trajectory::new(attrs, s)
        })
        .collect())
}

pub fn save_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = writer(path)?;
    let e = |err| csv_err(path, err);
    w.write_record(["time_s", "vehicle_id", "x_m", "y_m", "speed_mps", "heading_rad"]).map_err(e)?;
    for t in trajectories {
        for s in &t.states {
            w.write_record([
                s.time.to_string(),
                t.id().to_string(),
                s.position.x.to_string(),
                s.position.y.to_string(),
                s.speed.to_string(),
                s.heading.to_string(),
            ])
            .map_err(e)?;
        }
    }
    w.flush().map_err(|err| Error::io(path, err))
}

pub fn save_vehicles(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = writer(path)?;
    let e = |err| csv_err(path, err);
    w.write_record(["vehicle_id", "class", "length_m", "width_m", "mass_kg"]).map_err(e)?;
    for t in trajectories {
        let v = &t.vehicle;
        w.write_record([
            v.id.to_string(),
            v.class.as_str().to_string(),
            v.length.to_string(),
            v.width.to_string(),
            v.mass.to_string(),
        ])
        .map_err(e)?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

pub fn load_geometry(path: &Path) -> Result<StaticGeometry> {
    let mut rdr = reader(path)?;
    let cols = Columns::new(path, &mut rdr)?;
    let kind_c = cols.require(path, "kind")?;
    let id_c = cols.require(path, "id")?;
    let x_c = cols.require(path, "x_m")?;
    let y_c = cols.require(path, "y_m")?;
    let r_c = cols.find("radius_m");
    let mut barriers: BTreeMap<u64, (u64, Vec<Vec2>)> = BTreeMap::new();
    let mut obstacles: BTreeMap<u64, Obstacle> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let id = integer(path, &rec, id_c, "id")?;
        let p = Vec2::new(number(path, &rec, x_c, "x_m")?, number(path, &rec, y_c, "y_m")?);
        match field(path, &rec, kind_c, "kind")?.to_ascii_lowercase().as_str() {
            "barrier" => barriers.entry(id).or_insert_with(|| (line, Vec::new())).1.push(p),
            "obstacle" => {
                let radius = match r_c {
                    Some(c) if !field(path, &rec, c, "radius_m")?.is_empty() => number(path, &rec, c, "radius_m")?,
                    _ => DEFAULT_OBSTACLE_RADIUS,
                };
                if radius < 0.0 {
                    return Err(parse_err(path, line, format!("negative obstacle radius {radius}")));
                }
                if obstacles.insert(id, Obstacle { center: p, radius }).is_some() {
                    return Err(parse_err(path, line, format!("duplicate obstacle id {id}")));
                }
            }
            other => return Err(parse_err(path, line, format!("unknown geometry kind {other:?}"))),
        }
    }
    let mut out = StaticGeometry::default();
    for (id, (line, points)) in barriers {
        if points.len() < 2 {
            return Err(parse_err(path, line, format!("barrier {id} has fewer than two vertices")));
        }
        out.barriers.push(Barrier { points });
    }
    out.obstacles = obstacles.into_values().collect();
    Ok(out)
}

pub fn save_geometry(path: &Path, geometry: &StaticGeometry) -> Result<()> {
    let mut w = writer(path)?;
    let e = |err| csv_err(path, err);
    w.write_record(["kind", "id", "x_m", "y_m", "radius_m"]).map_err(e)?;
    for (i, b) in geometry.barriers.iter().enumerate() {
        for p in &b.points {
            w.write_record(["barrier".into(), i.to_string(), p.x.to_string(), p.y.to_string(), String::new()])
                .map_err(e)?;
        }
    }
    for (i, o) in geometry.obstacles.iter().enumerate() {
        w.write_record([
            "obstacle".into(),
            i.to_string(),
            o.center.x.to_string(),
            o.center.y.to_string(),
            o.radius.to_string(),
        ])
        .map_err(e)?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

const EVENT_COLUMNS: [&str; 20] = [
    "injection_time_s",
    "vehicle_id",
    "angle_index",
    "angle_rad",
    "partner_kind",
    "partner_id",
    "contact_time_s",
    "elapsed_s",
    "contact_x_m",
    "contact_y_m",
    "zombie_vx_mps",
    "zombie_vy_mps",
    "partner_vx_mps",
    "partner_vy_mps",
    "energy_total_j",
    "energy_1_j",
    "energy_2_j",
    "delta_v12_mps",
    "delta_v1_mps",
    "delta_v2_mps",
];

/// Per-event injury probabilities of the two participants, written as extra
/// columns when an injury model is configured.
pub type InjuryColumns<'a> = Option<&'a [(f64, f64)]>;

pub fn save_events(path: &Path, events: &[CrashEvent], injury: InjuryColumns) -> Result<()> {
    let mut w = writer(path)?;
    let e = |err| csv_err(path, err);
    let mut header: Vec<&str> = EVENT_COLUMNS.to_vec();
    if injury.is_some() {
        header.extend(["injury_prob_1", "injury_prob_2"]);
    }
    w.write_record(&header).map_err(e)?;
    for (i, ev) in events.iter().enumerate() {
        let mut row = vec![
            ev.injection_time.to_string(),
            ev.vehicle_id.to_string(),
            ev.angle_index.to_string(),
            ev.angle.to_string(),
            ev.partner.kind_str().to_string(),
            ev.partner.index().to_string(),
            ev.contact_time.to_string(),
            ev.elapsed.to_string(),
            ev.contact_point.x.to_string(),
            ev.contact_point.y.to_string(),
            ev.zombie_velocity.x.to_string(),
            ev.zombie_velocity.y.to_string(),
            ev.partner_velocity.x.to_string(),
            ev.partner_velocity.y.to_string(),
            ev.energy_total.to_string(),
            ev.energy_1.to_string(),
            ev.energy_2.to_string(),
            ev.delta_v12_mag.to_string(),
            ev.delta_v1_mag.to_string(),
            ev.delta_v2_mag.to_string(),
        ];
        if let Some(probs) = injury {
            let (p1, p2) = probs[i];
            row.push(p1.to_string());
            row.push(p2.to_string());
        }
        w.write_record(&row).map_err(e)?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

pub fn load_events(path: &Path) -> Result<Vec<CrashEvent>> {
    let mut rdr = reader(path)?;
    let cols = Columns::new(path, &mut rdr)?;
    let idx: Vec<usize> = EVENT_COLUMNS.iter().map(|c| cols.require(path, c)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let f = |k: usize| number(path, &rec, idx[k], EVENT_COLUMNS[k]);
        let partner_id = integer(path, &rec, idx[5], "partner_id")?;
        let partner = match field(path, &rec, idx[4], "partner_kind")? {
            "vehicle" => Partner::Vehicle(VehicleId(partner_id)),
            "barrier" => Partner::Barrier(partner_id as usize),
            "obstacle" => Partner::Obstacle(partner_id as usize),
            other => return Err(parse_err(path, line, format!("unknown partner kind {other:?}"))),
        };
        out.push(CrashEvent {
            injection_time: f(0)?,
            vehicle_id: VehicleId(integer(path, &rec, idx[1], "vehicle_id")?),
            angle_index: integer(path, &rec, idx[2], "angle_index")? as usize,
            angle: f(3)?,
            partner,
            contact_time: f(6)?,
            elapsed: f(7)?,
            contact_point: Vec2::new(f(8)?, f(9)?),
            zombie_velocity: Vec2::new(f(10)?, f(11)?),
            partner_velocity: Vec2::new(f(12)?, f(13)?),
            energy_total: f(14)?,
            energy_1: f(15)?,
            energy_2: f(16)?,
            delta_v12_mag: f(17)?,
            delta_v1_mag: f(18)?,
            delta_v2_mag: f(19)?,
        });
    }
    Ok(out)
}

/// Writes a danger grid as a delimited matrix.
///
/// Two `#` header lines carry the geometry; then one line per row, starting at
/// the row nearest the origin. When `counts` is set, event counts are written
/// instead of energies.
pub fn save_grid(path: &Path, grid: &DangerGrid, indicator: &str, counts: bool) -> Result<()> {
    let mut out = String::new();
    out.push_str("# origin_x_m,origin_y_m,cell_size_m,n_cols,n_rows,overflow_j,overflow_count,indicator,values\n");
    out.push_str(&format!(
        "# {},{},{},{},{},{},{},{},{}\n",
        grid.origin.x,
        grid.origin.y,
        grid.cell_size,
        grid.n_cols,
        grid.n_rows,
        grid.overflow_energy,
        grid.overflow_count,
        indicator,
        if counts { "count" } else { "energy_j" }
    ));
    for r in 0..grid.n_rows {
        let row: Vec<String> = (0..grid.n_cols)
            .map(|c| if counts { grid.count(c, r).to_string() } else { grid.cell(c, r).to_string() })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads the energy matrix written by [`save_grid`].
pub fn load_grid(path: &Path) -> Result<DangerGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, m: &str| parse_err(path, line as u64 + 1, m);
    lines.next().ok_or_else(|| bad(0, "empty grid file"))?;
    let (hl, header) = lines.next().ok_or_else(|| bad(1, "missing grid header"))?;
    let meta: Vec<&str> = header.trim_start_matches('#').trim().split(',').collect();
    if meta.len() != 9 {
        return Err(bad(hl, "malformed grid header"));
    }
    let num = |i: usize| meta[i].parse::<f64>().map_err(|_| bad(hl, "malformed grid header"));
    let n_cols = num(3)? as usize;
    let n_rows = num(4)? as usize;
    let mut energy = Vec::with_capacity(n_cols * n_rows);
    for (ln, line) in lines {
        for v in line.split(',') {
            energy.push(v.trim().parse::<f64>().map_err(|_| bad(ln, "non-numeric cell"))?);
        }
    }
    if energy.len() != n_cols * n_rows {
        return Err(bad(hl, "cell count does not match header"));
    }
    Ok(DangerGrid {
        origin: Vec2::new(num(0)?, num(1)?),
        cell_size: num(2)?,
        n_cols,
        n_rows,
        energy,
        counts: vec![0; n_cols * n_rows],
        overflow_energy: num(5)?,
        overflow_count: num(6)? as u64,
    })
}

pub fn save_conflicts(path: &Path, conflicts: &[ConflictEvent]) -> Result<()> {
    let mut w = writer(path)?;
    let e = |err| csv_err(path, err);
    w.write_record(["time_s", "vehicle_a", "vehicle_b", "ttc_s"]).map_err(e)?;
    for c in conflicts {
        w.write_record([c.time.to_string(), c.vehicle_a.to_string(), c.vehicle_b.to_string(), c.ttc.to_string()])
            .map_err(e)?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}
