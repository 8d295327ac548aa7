//! `zsafe`: crash-energy safety analysis of vehicle trajectories.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use zsafe_core::model::validate_scenario;
use zsafe_core::pipeline::{self, DangerMapConfig, InjuryConfig, Number, RunConfig, ScenarioSource};
use zsafe_core::scenario_gen::{analytic_total_energy_example1, analytic_total_energy_example2};
use zsafe_core::ttc::TtcParams;
use zsafe_core::{io, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "zsafe", version, about = "Driver-error injection and crash-energy safety indicators")]
struct Cli {
    /// Log level for notices on stderr (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a scenario and write it as trajectory, vehicle and geometry tables
    Generate(GenerateArgs),
    /// Inject driver errors and compute crash-energy indicators
    Analyze(AnalyzeArgs),
    /// Count time-to-collision conflicts
    Ttc(TtcArgs),
    /// Closed-form corridor totals
    Oracle(OracleArgs),
    /// Check a scenario for inconsistent data
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Generator {
    WallCorridor,
    TreeCorridor,
    OpposingFlow,
}

impl Generator {
    fn tag(self) -> &'static str {
        match self {
            Generator::WallCorridor => "wall_corridor",
            Generator::TreeCorridor => "tree_corridor",
            Generator::OpposingFlow => "opposing_flow",
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: Generator,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    sample_step: Option<f64>,
    #[arg(long)]
    wall_offset: Option<f64>,
    #[arg(long)]
    tree_spacing: Option<f64>,
    #[arg(long)]
    tree_offset: Option<f64>,
    #[arg(long)]
    tree_radius: Option<f64>,
    /// veh/h per direction.
    #[arg(long)]
    flow: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lateral_gap: Option<f64>,
    /// Ramp angle of a lateral road deviation, degrees.
    #[arg(long, requires = "deviation_shift")]
    deviation_angle_deg: Option<f64>,
    /// Total lateral shift of the deviation, m.
    #[arg(long, requires = "deviation_angle_deg")]
    deviation_shift: Option<f64>,
    /// x of the ramp midpoint, m (road midpoint by default).
    #[arg(long, requires = "deviation_angle_deg")]
    deviation_position: Option<f64>,
}

impl GenerateArgs {
    fn source(&self) -> Result<ScenarioSource> {
        let mut m = Map::new();
        m.insert("kind".into(), json!(self.kind.tag()));
        let fields = [
            ("length", self.length),
            ("speed", self.speed),
            ("mass", self.mass),
            ("margin", self.margin),
            ("sample_step", self.sample_step),
            ("wall_offset", self.wall_offset),
            ("tree_spacing", self.tree_spacing),
            ("tree_offset", self.tree_offset),
            ("tree_radius", self.tree_radius),
            ("flow_per_dir", self.flow),
            ("duration", self.duration),
            ("lateral_gap", self.lateral_gap),
        ];
        for (k, v) in fields {
            if let Some(v) = v {
                m.insert(k.into(), json!(v));
            }
        }
        if let Some(seed) = self.seed {
            m.insert("seed".into(), json!(seed));
        }
        if let (Some(angle), Some(shift)) = (self.deviation_angle_deg, self.deviation_shift) {
            let length = self.length.unwrap_or(200.0);
            m.insert(
                "deviation".into(),
                json!({
                    "position": self.deviation_position.unwrap_or(length / 2.0),
                    "angle": angle.to_radians(),
                    "shift": shift,
                }),
            );
        }
        serde_json::from_value(Value::Object(m))
            .map_err(|e| Error::Config(format!("{} does not take that option: {e}", self.kind.tag())))
    }
}

/// Where the scenario comes from, when not (only) from a config file.
#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Run configuration (TOML); flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "generator")]
    trajectories: Option<PathBuf>,
    #[arg(long, requires = "trajectories")]
    vehicles: Option<PathBuf>,
    #[arg(long, requires = "trajectories")]
    geometry: Option<PathBuf>,
    /// Analyze a generated scenario with default parameters.
    #[arg(long, value_enum)]
    generator: Option<Generator>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ScenarioArgs {
    fn base_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => {
                let source = self.source()?.ok_or_else(|| {
                    Error::Config("no scenario: pass --config, --trajectories or --generator".into())
                })?;
                RunConfig::new(source)
            }
        };
        if self.config.is_some() {
            if let Some(source) = self.source()? {
                cfg.scenario = source;
            }
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }

    fn source(&self) -> Result<Option<ScenarioSource>> {
        if let Some(t) = &self.trajectories {
            return Ok(Some(ScenarioSource::Files {
                trajectories: t.clone(),
                vehicles: self.vehicles.clone(),
                geometry: self.geometry.clone(),
            }));
        }
        self.generator
            .map(|g| {
                serde_json::from_value(json!({ "kind": g.tag() })).map_err(|e| Error::Internal(e.to_string()))
            })
            .transpose()
    }
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Indicator such as Z5-15-1/3; repeatable, replaces the configured list.
    #[arg(long = "indicator")]
    indicators: Vec<String>,
    /// Energy threshold for the thresholded summary, J; repeatable.
    #[arg(long = "threshold")]
    thresholds_j: Vec<f64>,
    /// Danger-map cell size, m; enables the map.
    #[arg(long)]
    cell_size: Option<f64>,
    /// Also count TTC conflicts at this threshold, s.
    #[arg(long)]
    ttc_threshold: Option<f64>,
    #[arg(long)]
    time_step: Option<f64>,
    #[arg(long)]
    distraction_time: Option<f64>,
    /// Comma-separated deviation angles, degrees (positive = left).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    angles_deg: Option<Vec<f64>>,
    /// Comma-separated angle weights; fractions such as 1/3 are accepted.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<String>>,
    #[arg(long)]
    sub_step: Option<f64>,
    /// Seeded Monte Carlo injection instead of the fixed grid.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo injections per vehicle-second.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, requires = "injury_k")]
    injury_alpha: Option<f64>,
    #[arg(long, requires = "injury_alpha")]
    injury_k: Option<f64>,
}

impl AnalyzeArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = self.scenario.base_config()?;
        if !self.indicators.is_empty() {
            cfg.indicators = self
                .indicators
                .iter()
                .map(|s| s.parse().map_err(|e: Error| Error::Config(e.to_string())))
                .collect::<Result<_>>()?;
        }
        if !self.thresholds_j.is_empty() {
            cfg.thresholds_j = self.thresholds_j.clone();
        }
        if let Some(cell_size) = self.cell_size {
            match &mut cfg.danger_map {
                Some(dm) => dm.cell_size = cell_size,
                None => {
                    cfg.danger_map = Some(DangerMapConfig {
                        cell_size,
                        origin: None,
                        width: None,
                        height: None,
                        indicator: None,
                    })
                }
            }
        }
        if let Some(threshold) = self.ttc_threshold {
            cfg.ttc = Some(TtcParams {
                threshold,
                ..cfg.ttc.unwrap_or_default()
            });
        }
        let inj = &mut cfg.injection;
        set(&mut inj.time_step, self.time_step);
        set(&mut inj.distraction_time, self.distraction_time);
        set(&mut inj.sub_step, self.sub_step);
        set(&mut inj.rate, self.rate);
        if let Some(a) = &self.angles_deg {
            inj.angles_deg = a.clone();
        }
        if let Some(w) = &self.weights {
            inj.weights = Some(w.iter().cloned().map(Number::Text).collect());
        }
        if self.seed.is_some() {
            inj.seed = self.seed;
        }
        set(&mut cfg.workers, self.workers);
        if let (Some(alpha), Some(k)) = (self.injury_alpha, self.injury_k) {
            cfg.injury = Some(InjuryConfig { alpha, k });
        }
        Ok(cfg)
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Args, Debug)]
struct TtcArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Conflict threshold, s.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    sub_step: Option<f64>,
    /// Spacing of the evaluation instants, s.
    #[arg(long)]
    time_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Corridor {
    /// Concrete walls on both sides.
    Walls,
    /// Trees on both sides.
    Trees,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(value_enum)]
    corridor: Corridor,
    #[arg(long, default_value_t = 1000.0)]
    length: f64,
    #[arg(long, default_value_t = 25.0)]
    speed: f64,
    #[arg(long, default_value_t = 1000.0)]
    mass: f64,
    /// Side deviation, degrees (walls only).
    #[arg(long, default_value_t = 15.0)]
    angle_deg: f64,
    #[arg(long, default_value_t = 1.0)]
    time_step: f64,
    /// Weight of the straight projection; fractions such as 1/3 are accepted.
    #[arg(long, default_value = "1/3")]
    weight: String,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
}

fn print_json(v: &Value) {
    let text = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let scenario = args.source()?.load()?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Config(format!("{}: {e}", args.out.display())))?;
    let paths = [
        args.out.join("trajectories.csv"),
        args.out.join("vehicles.csv"),
        args.out.join("geometry.csv"),
    ];
    io::save_trajectories(&paths[0], &scenario.trajectories)?;
    io::save_vehicles(&paths[1], &scenario.trajectories)?;
    io::save_geometry(&paths[2], &scenario.geometry)?;
    print_json(&json!({
        "scenario": pipeline::ScenarioSummary::of(&scenario),
        "files": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn run_and_report(cfg: &RunConfig) -> Result<()> {
    let out = pipeline::run(cfg)?;
    let mut v = serde_json::to_value(&out.report).map_err(|e| Error::Internal(e.to_string()))?;
    v["output_dir"] = json!(cfg.output_dir.display().to_string());
    print_json(&v);
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    run_and_report(&args.config()?)
}

fn ttc(args: &TtcArgs) -> Result<()> {
    let mut cfg = args.scenario.base_config()?;
    cfg.indicators.clear();
    cfg.thresholds_j.clear();
    cfg.danger_map = None;
    let mut params = cfg.ttc.unwrap_or_default();
    set(&mut params.threshold, args.threshold);
    set(&mut params.sub_step, args.sub_step);
    set(&mut params.time_step, args.time_step);
    cfg.ttc = Some(params);
    run_and_report(&cfg)
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let w = Number::Text(args.weight.clone()).value()?;
    let (z, raw) = match args.corridor {
        Corridor::Walls => {
            let theta = args.angle_deg.to_radians();
            let f = |w| analytic_total_energy_example1(args.length, args.speed, args.mass, theta, args.time_step, w);
            (f(w)?, 2.0 * f(0.0)?)
        }
        Corridor::Trees => {
            let f = |w| analytic_total_energy_example2(args.length, args.speed, args.mass, args.time_step, w);
            (f(w)?, 2.0 * f(0.0)?)
        }
    };
    print_json(&json!({
        "corridor": format!("{:?}", args.corridor).to_lowercase(),
        "positions": args.length / (args.speed * args.time_step),
        "raw_total_j": raw,
        "weighted_j": z,
        "straight_weight": w,
    }));
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<()> {
    let cfg = args.scenario.base_config()?;
    let scenario = cfg.scenario.load()?;
    let diagnostics = validate_scenario(&scenario);
    print_json(&json!({
        "scenario": pipeline::ScenarioSummary::of(&scenario),
        "diagnostics": diagnostics,
    }));
    Ok(())
}

fn error_record(kind: &str, message: &str, code: u8) -> String {
    json!({ "error": kind, "message": message, "exit_code": code }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_record("usage", e.to_string().trim(), 1));
            return ExitCode::from(1);
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).format_target(false).init();

    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Analyze(a) => analyze(a),
        Command::Ttc(a) => ttc(a),
        Command::Oracle(a) => oracle(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code() as u8;
            eprintln!("{}", error_record(e.kind(), &e.to_string(), code));
            ExitCode::from(code)
        }
    }
}
