//! Configured end-to-end runs: scenario → injections → indicators → files.
//!
//! A run is described by a TOML document:
//!
//! ```toml
//! output_dir = "out"
//! indicators = ["Z5-15-1/3"]
//! thresholds_j = [0.0, 100000.0]
//!
//! [scenario]
//! kind = "wall_corridor"      # or tree_corridor, opposing_flow, files
//! length = 1000.0
//!
//! [injection]
//! time_step = 1.0
//! distraction_time = 5.0
//! angles_deg = [-15.0, 0.0, 15.0]
//!
//! [danger_map]
//! cell_size = 10.0
//!
//! [ttc]
//! threshold = 1.5
//! ```
//!
//! File paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::injury_probability;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::indicators::{aggregate_stats, danger_map, threshold_view, z_breakdown, DangerGrid, GridSpec, Summary, ThresholdView, ZBreakdown, ZSpec};
use crate::injection::CrashEvent;
use crate::io;
use crate::model::{InjectionParams, Scenario, StaticGeometry};
use crate::scenario_gen::{gen_opposing_flow, gen_tree_corridor, gen_wall_corridor, OpposingFlowSpec, TreeCorridorSpec, WallCorridorSpec};
use crate::ttc::{count_conflicts, ConflictEvent, TtcParams};

pub const EVENTS_FILE: &str = "events.csv";
pub const REPORT_FILE: &str = "report.json";
pub const GRID_FILE: &str = "danger_grid.csv";
pub const GRID_COUNTS_FILE: &str = "danger_counts.csv";
pub const CONFLICTS_FILE: &str = "ttc_conflicts.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSource {
    Files {
        trajectories: PathBuf,
        #[serde(default)]
        vehicles: Option<PathBuf>,
        #[serde(default)]
        geometry: Option<PathBuf>,
    },
    WallCorridor(WallCorridorSpec),
    TreeCorridor(TreeCorridorSpec),
    OpposingFlow(OpposingFlowSpec),
}

impl ScenarioSource {
    pub fn load(&self) -> Result<Scenario> {
        match self {
            ScenarioSource::Files {
                trajectories,
                vehicles,
                geometry,
            } => {
                let table = vehicles.as_deref().map(io::load_vehicles).transpose()?;
                let trajs = io::load_trajectories(trajectories, table.as_ref())?;
                let geometry = match geometry {
                    Some(g) => io::load_geometry(g)?,
                    None => StaticGeometry::default(),
                };
                Ok(Scenario::new(trajs, geometry))
            }
            ScenarioSource::WallCorridor(s) => gen_wall_corridor(s),
            ScenarioSource::TreeCorridor(s) => gen_tree_corridor(s),
            ScenarioSource::OpposingFlow(s) => gen_opposing_flow(s),
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let ScenarioSource::Files {
            trajectories,
            vehicles,
            geometry,
        } = self
        {
            for p in std::iter::once(trajectories).chain(vehicles.iter_mut()).chain(geometry.iter_mut()) {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }
}

/// A number given either literally or as a fraction string such as `"1/3"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Text(String),
}

impl Number {
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Text(s) => {
                let parsed = match s.split_once('/') {
                    Some((n, d)) => n.trim().parse::<f64>().ok().zip(d.trim().parse::<f64>().ok()).map(|(n, d)| n / d),
                    None => s.trim().parse().ok(),
                };
                parsed
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Config(format!("not a number: {s:?}")))
            }
        }
    }
}

/// Injection settings as written in a config file (angles in degrees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionConfig {
    pub time_step: f64,
    pub distraction_time: f64,
    pub angles_deg: Vec<f64>,
    /// Uniform when omitted.
    pub weights: Option<Vec<Number>>,
    pub sub_step: f64,
    pub seed: Option<u64>,
    pub rate: f64,
    pub epsilon: f64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        let p = InjectionParams::default();
        InjectionConfig {
            time_step: p.time_step,
            distraction_time: p.distraction_time,
            angles_deg: vec![-15.0, 0.0, 15.0],
            weights: None,
            sub_step: p.sub_step,
            seed: p.seed,
            rate: p.rate,
            epsilon: p.epsilon,
        }
    }
}

impl InjectionConfig {
    pub fn params(&self) -> Result<InjectionParams> {
        let n = self.angles_deg.len();
        let weights = match &self.weights {
            Some(w) => w.iter().map(Number::value).collect::<Result<Vec<_>>>()?,
            None => vec![1.0 / n.max(1) as f64; n],
        };
        let p = InjectionParams {
            time_step: self.time_step,
            distraction_time: self.distraction_time,
            angles: self.angles_deg.iter().map(|a| a.to_radians()).collect(),
            weights,
            sub_step: self.sub_step,
            seed: self.seed,
            rate: self.rate,
            epsilon: self.epsilon,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DangerMapConfig {
    pub cell_size: f64,
    /// Lower-left corner; the scenario bounds (plus one cell) when omitted.
    #[serde(default)]
    pub origin: Option<[f64; 2]>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub height: Option<f64>,
    /// Weighting indicator; the first configured indicator when omitted.
    #[serde(default)]
    pub indicator: Option<ZSpec>,
}

impl DangerMapConfig {
    pub fn grid_spec(&self, scenario: &Scenario) -> Result<GridSpec> {
        let c = self.cell_size;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Config(format!("danger_map.cell_size must be > 0, got {c}")));
        }
        let b = scenario.bounds;
        let origin = match self.origin {
            Some([x, y]) => Vec2::new(x, y),
            None => Vec2::new((b.min.x / c).floor() * c - c, (b.min.y / c).floor() * c - c),
        };
        let fill = |given: Option<f64>, hi: f64, lo: f64| given.unwrap_or(((hi - lo) / c).ceil() * c + c);
        Ok(GridSpec {
            origin,
            cell_size: c,
            width: fill(self.width, b.max.x, origin.x),
            height: fill(self.height, b.max.y, origin.y),
        })
    }
}

/// Joksch-type injury model parameters; there are no defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjuryConfig {
    pub alpha: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSource,
    #[serde(default)]
    pub injection: InjectionConfig,
    #[serde(default)]
    pub indicators: Vec<ZSpec>,
    #[serde(default)]
    pub thresholds_j: Vec<f64>,
    #[serde(default)]
    pub danger_map: Option<DangerMapConfig>,
    #[serde(default)]
    pub ttc: Option<TtcParams>,
    #[serde(default)]
    pub injury: Option<InjuryConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads for the injection engine; 0 lets the runtime decide.
    #[serde(default)]
    pub workers: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// A config over `scenario` with default injection settings and no
    /// analyses selected.
    pub fn new(scenario: ScenarioSource) -> Self {
        RunConfig {
            scenario,
            injection: InjectionConfig::default(),
            indicators: Vec::new(),
            thresholds_j: Vec::new(),
            danger_map: None,
            ttc: None,
            injury: None,
            output_dir: default_output_dir(),
            workers: 0,
        }
    }

    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.scenario.resolve(base_dir);
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base_dir.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Whether any crash-energy analysis needs the injection engine.
    pub fn needs_injection(&self) -> bool {
        !self.indicators.is_empty() || !self.thresholds_j.is_empty() || self.danger_map.is_some()
    }

    pub fn validate(&self) -> Result<InjectionParams> {
        if !self.needs_injection() && self.ttc.is_none() {
            return Err(Error::Config(
                "no analysis requested: set indicators, thresholds_j, danger_map or ttc".into(),
            ));
        }
        let params = self.injection.params()?;
        for z in &self.indicators {
            z.check_params(&params).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(dm) = &self.danger_map {
            let spec = self.danger_indicator(dm)?;
            spec.check_params(&params).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(t) = &self.ttc {
            t.validate()?;
        }
        if let Some(inj) = &self.injury {
            injury_probability(0.0, inj.alpha, inj.k)?;
        }
        if let Some(t) = self.thresholds_j.iter().find(|t| !t.is_finite()) {
            return Err(Error::Config(format!("threshold {t} is not finite")));
        }
        if let ScenarioSource::Files {
            trajectories,
            vehicles,
            geometry,
        } = &self.scenario
        {
            for p in std::iter::once(trajectories).chain(vehicles).chain(geometry) {
                if !p.is_file() {
                    return Err(Error::Config(format!("input file {} does not exist", p.display())));
                }
            }
        }
        Ok(params)
    }

    fn danger_indicator<'a>(&'a self, dm: &'a DangerMapConfig) -> Result<&'a ZSpec> {
        dm.indicator
            .as_ref()
            .or(self.indicators.first())
            .ok_or_else(|| Error::Config("danger_map needs an indicator (danger_map.indicator or indicators)".into()))
    }
}

/// Grid metadata as it appears in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DangerMapSummary {
    pub indicator: String,
    pub origin: [f64; 2],
    pub cell_size_m: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    pub total_j: f64,
    pub overflow_j: f64,
    pub overflow_count: u64,
    pub max_cell_j: f64,
}

/// Everything derived from the crash events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub indicators: Vec<ZBreakdown>,
    pub summary: Summary,
    pub thresholds: Vec<ThresholdView>,
    pub danger_map: Option<DangerMapSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtcSummary {
    pub threshold_s: f64,
    pub conflicts: usize,
    pub min_ttc_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub vehicles: usize,
    pub samples: usize,
    pub barriers: usize,
    pub obstacles: usize,
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
}

impl ScenarioSummary {
    pub fn of(s: &Scenario) -> Self {
        let span = s.time_span();
        ScenarioSummary {
            vehicles: s.trajectories.len(),
            samples: s.trajectories.iter().map(|t| t.states.len()).sum(),
            barriers: s.geometry.barriers.len(),
            obstacles: s.geometry.obstacles.len(),
            start_s: span.map(|s| s.0),
            end_s: span.map(|s| s.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: ScenarioSummary,
    pub injection: Option<InjectionParams>,
    pub report: Option<IndicatorReport>,
    pub ttc: Option<TtcSummary>,
}

/// The in-memory result of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub events: Vec<CrashEvent>,
    pub grid: Option<DangerGrid>,
    pub conflicts: Option<Vec<ConflictEvent>>,
}

/// Computes the indicator part of the report from events alone (plus the config), so a
/// saved event log can be re-aggregated to the same numbers.
pub fn build_indicator_report(
    events: &[CrashEvent],
    params: &InjectionParams,
    config: &RunConfig,
    grid: Option<&DangerGrid>,
) -> Result<IndicatorReport> {
    let indicators = config
        .indicators
        .iter()
        .map(|z| z_breakdown(events, params, z))
        .collect::<Result<Vec<_>>>()?;
    let danger_map = match (&config.danger_map, grid) {
        (Some(dm), Some(g)) => Some(DangerMapSummary {
            indicator: config.danger_indicator(dm)?.name().to_string(),
            origin: [g.origin.x, g.origin.y],
            cell_size_m: g.cell_size,
            n_cols: g.n_cols,
            n_rows: g.n_rows,
            total_j: g.total(),
            overflow_j: g.overflow_energy,
            overflow_count: g.overflow_count,
            max_cell_j: g.energy.iter().copied().fold(0.0, f64::max),
        }),
        _ => None,
    };
    Ok(IndicatorReport {
        indicators,
        summary: aggregate_stats(events),
        thresholds: config.thresholds_j.iter().map(|&t| threshold_view(events, t)).collect(),
        danger_map,
    })
}

fn injections(scenario: &Scenario, params: &InjectionParams, workers: usize) -> Result<Vec<CrashEvent>> {
    #[cfg(feature = "parallel")]
    if workers > 0 {
        return crate::injection::inject_all_with_workers(scenario, params, workers);
    }
    let _ = workers;
    crate::injection::inject_all(scenario, params)
}

/// Runs every requested analysis without touching the file system (other
/// than reading input files).
pub fn compute(config: &RunConfig) -> Result<RunOutput> {
    let params = config.validate()?;
    let scenario = config.scenario.load()?;
    compute_on(config, &params, &scenario)
}

pub fn compute_on(config: &RunConfig, params: &InjectionParams, scenario: &Scenario) -> Result<RunOutput> {
    let (events, grid, report) = if config.needs_injection() {
        let events = injections(scenario, params, config.workers)?;
        let grid = match &config.danger_map {
            Some(dm) => {
                let spec = config.danger_indicator(dm)?;
                Some(danger_map(&events, params, &dm.grid_spec(scenario)?, spec)?)
            }
            None => None,
        };
        let report = build_indicator_report(&events, params, config, grid.as_ref())?;
        (events, grid, Some(report))
    } else {
        (Vec::new(), None, None)
    };
    let conflicts = config.ttc.as_ref().map(|t| count_conflicts(scenario, t)).transpose()?;
    let ttc = config.ttc.as_ref().zip(conflicts.as_ref()).map(|(t, c)| TtcSummary {
        threshold_s: t.threshold,
        conflicts: c.len(),
        min_ttc_s: c.iter().map(|e| e.ttc).reduce(f64::min),
    });
    Ok(RunOutput {
        report: RunReport {
            scenario: ScenarioSummary::of(scenario),
            injection: config.needs_injection().then(|| params.clone()),
            report,
            ttc,
        },
        events,
        grid,
        conflicts,
    })
}

pub fn injury_columns(events: &[CrashEvent], injury: &InjuryConfig) -> Result<Vec<(f64, f64)>> {
    events
        .iter()
        .map(|e| {
            Ok((
                injury_probability(e.delta_v1_mag, injury.alpha, injury.k)?,
                injury_probability(e.delta_v2_mag, injury.alpha, injury.k)?,
            ))
        })
        .collect()
}

pub fn report_json(report: &RunReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Internal(format!("report serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes the artifacts of `out` into `dir`; returns the paths written.
pub fn write_outputs(config: &RunConfig, out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    if out.report.report.is_some() {
        let p = dir.join(EVENTS_FILE);
        let probs = config.injury.as_ref().map(|i| injury_columns(&out.events, i)).transpose()?;
        io::save_events(&p, &out.events, probs.as_deref())?;
        written.push(p);
    }
    if let (Some(grid), Some(summary)) = (&out.grid, out.report.report.as_ref().and_then(|r| r.danger_map.as_ref())) {
        let p = dir.join(GRID_FILE);
        io::save_grid(&p, grid, &summary.indicator, false)?;
        written.push(p);
        let p = dir.join(GRID_COUNTS_FILE);
        io::save_grid(&p, grid, &summary.indicator, true)?;
        written.push(p);
    }
    if let Some(c) = &out.conflicts {
        let p = dir.join(CONFLICTS_FILE);
        io::save_conflicts(&p, c)?;
        written.push(p);
    }
    let p = dir.join(REPORT_FILE);
    fs::write(&p, report_json(&out.report)?).map_err(|e| Error::io(&p, e))?;
    written.push(p);
    Ok(written)
}

/// [`compute`] followed by [`write_outputs`] into the configured directory.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let out = compute(config)?;
    write_outputs(config, &out, &config.output_dir)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> RunConfig {
        RunConfig {
            indicators: vec!["Z5-15-1/3".parse().unwrap()],
            ..RunConfig::new(ScenarioSource::WallCorridor(WallCorridorSpec::default()))
        }
    }

    #[test]
    fn toml_round_trip_of_generator_config() {
        let text = r#"
            indicators = ["Z5-15-1/3"]
            thresholds_j = [0.0, 1e5]
            output_dir = "results"

            [scenario]
            kind = "tree_corridor"
            length = 500.0

            [injection]
            weights = ["1/3", "1/3", "1/3"]

            [danger_map]
            cell_size = 5.0
        "#;
        let cfg = RunConfig::from_toml(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.output_dir, Path::new("/base/results"));
        match &cfg.scenario {
            ScenarioSource::TreeCorridor(s) => {
                assert_eq!(s.length, 500.0);
                assert_eq!(s.speed, 25.0);
            }
            other => panic!("{other:?}"),
        }
        let p = cfg.validate().unwrap();
        assert_eq!(p.angles.len(), 3);
        assert!((p.angles[2] - 15f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let text = "indicators = [\"Z5-15-1/3\"]\n[scenario]\nkind = \"wall_corridor\"\nlenght = 10.0\n";
        assert!(matches!(RunConfig::from_toml(text, Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn relative_input_paths_resolve_against_config_dir() {
        let text = "indicators = [\"Z5-15-1/3\"]\n[scenario]\nkind = \"files\"\ntrajectories = \"t.csv\"\n";
        let cfg = RunConfig::from_toml(text, Path::new("/data")).unwrap();
        assert_eq!(
            cfg.scenario,
            ScenarioSource::Files {
                trajectories: "/data/t.csv".into(),
                vehicles: None,
                geometry: None
            }
        );
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("does not exist")));
    }

    #[test]
    fn zero_analyses_is_a_config_error() {
        let cfg = RunConfig::new(ScenarioSource::WallCorridor(WallCorridorSpec::default()));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn incompatible_indicator_is_a_config_error() {
        let cfg = RunConfig {
            indicators: vec!["Z3-15-0.80".parse().unwrap()],
            ..example1()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn example1_report() {
        let out = compute(&example1()).unwrap();
        let r = out.report.report.unwrap();
        assert_eq!(r.summary.count, 80);
        assert!((r.indicators[0].weighted_j - 558_227.0).abs() < 20.0, "{}", r.indicators[0].weighted_j);
        assert!(out.report.ttc.is_none());
    }

    #[test]
    fn danger_map_total_matches_weighted_indicator() {
        let cfg = RunConfig {
            danger_map: Some(DangerMapConfig {
                cell_size: 10.0,
                origin: None,
                width: None,
                height: None,
                indicator: None,
            }),
            ..example1()
        };
        let out = compute(&cfg).unwrap();
        let r = out.report.report.unwrap();
        let dm = r.danger_map.unwrap();
        assert_eq!(dm.overflow_count, 0);
        assert!((dm.total_j - r.indicators[0].weighted_j).abs() < 1e-6 * dm.total_j);
    }

    #[test]
    fn saved_events_reaggregate_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            thresholds_j: vec![0.0, 20_000.0],
            injury: Some(InjuryConfig { alpha: 20.0, k: 2.0 }),
            ..example1()
        };
        let out = compute(&cfg).unwrap();
        write_outputs(&cfg, &out, dir.path()).unwrap();
        let events = io::load_events(&dir.path().join(EVENTS_FILE)).unwrap();
        assert_eq!(events, out.events);
        let params = cfg.injection.params().unwrap();
        let again = build_indicator_report(&events, &params, &cfg, None).unwrap();
        assert_eq!(Some(again), out.report.report);
        let header = fs::read_to_string(dir.path().join(EVENTS_FILE)).unwrap();
        assert!(header.lines().next().unwrap().ends_with("injury_prob_1,injury_prob_2"));
    }
}
