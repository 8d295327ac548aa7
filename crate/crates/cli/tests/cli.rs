use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn zsafe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zsafe"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_record(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    let last = line.lines().last().expect("an error record");
    serde_json::from_str(last).expect("stderr record is JSON")
}

const EXAMPLE1: &str = r#"
output_dir = "out"
indicators = ["Z5-15-1/3"]
thresholds_j = [0.0, 25000.0]

[scenario]
kind = "wall_corridor"

[danger_map]
cell_size = 50.0
"#;

#[test]
fn example1_config_reports_the_reference_value() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), EXAMPLE1).unwrap();
    let out = zsafe(&["analyze", "--config", "run.toml"], dir.path());
    let v = stdout_json(&out);
    let z = v["report"]["indicators"][0]["weighted_j"].as_f64().unwrap();
    assert!((z - 558_227.0).abs() < 20.0, "{z}");
    assert_eq!(v["report"]["summary"]["count"], 80);

    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["indicators"][0]["name"], "Z5-15-1/3");
    for f in ["events.csv", "danger_grid.csv", "danger_counts.csv"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    let grid = fs::read_to_string(dir.path().join("out/danger_grid.csv")).unwrap();
    assert!(grid.starts_with("# origin_x_m,"));
}

#[test]
fn same_config_twice_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), EXAMPLE1).unwrap();
    let read = |d: &str| {
        ["events.csv", "report.json", "danger_grid.csv", "danger_counts.csv"]
            .map(|f| fs::read(dir.path().join(d).join(f)).unwrap())
    };
    stdout_json(&zsafe(&["analyze", "-c", "run.toml", "--out", "a", "--workers", "1"], dir.path()));
    stdout_json(&zsafe(&["analyze", "-c", "run.toml", "--out", "b", "--workers", "3"], dir.path()));
    assert_eq!(read("a"), read("b"));
}

#[test]
fn zero_analyses_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[scenario]\nkind = \"wall_corridor\"\n").unwrap();
    let out = zsafe(&["analyze", "--config", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let rec = stderr_record(&out);
    assert_eq!(rec["error"], "config");
    assert_eq!(rec["exit_code"], 1);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), EXAMPLE1).unwrap();
    let out = zsafe(
        &["analyze", "-c", "run.toml", "--time-step", "2", "--indicator", "Z5-15-0.5"],
        dir.path(),
    );
    let v = stdout_json(&out);
    let ind = &v["report"]["indicators"][0];
    assert_eq!(ind["name"], "Z5-15-0.5");
    assert_eq!(v["report"]["summary"]["count"], 40);
    // half the positions, side weight 1/4 instead of 1/3
    let expected = 1_674_682.0 / 2.0 * 0.25;
    assert!((ind["weighted_j"].as_f64().unwrap() - expected).abs() < 10.0);
}

#[test]
fn generate_then_analyze_files_with_ttc_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let gen = zsafe(
        &[
            "generate",
            "opposing-flow",
            "--out",
            "road",
            "--duration",
            "300",
            "--seed",
            "9",
            "--deviation-angle-deg",
            "3",
            "--deviation-shift",
            "3.5",
        ],
        dir.path(),
    );
    let g = stdout_json(&gen);
    assert!(g["scenario"]["vehicles"].as_u64().unwrap() > 0);

    let out = zsafe(
        &[
            "analyze",
            "--trajectories",
            "road/trajectories.csv",
            "--vehicles",
            "road/vehicles.csv",
            "--indicator",
            "Z5-15-1/3",
            "--ttc-threshold",
            "1.5",
            "--out",
            "res",
        ],
        dir.path(),
    );
    let v = stdout_json(&out);
    assert_eq!(v["ttc"]["conflicts"], 0);
    assert!(v["report"]["indicators"][0]["weighted_j"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("res/ttc_conflicts.csv").is_file());

    let t = stdout_json(&zsafe(
        &["ttc", "--trajectories", "road/trajectories.csv", "--threshold", "1.5", "--out", "ttc"],
        dir.path(),
    ));
    assert_eq!(t["ttc"]["conflicts"], 0);
    assert!(t["report"].is_null());

    let val = stdout_json(&zsafe(
        &["validate", "--trajectories", "road/trajectories.csv", "--vehicles", "road/vehicles.csv"],
        dir.path(),
    ));
    assert_eq!(val["diagnostics"].as_array().unwrap().len(), 0);
}

#[test]
fn oracle_values() {
    let dir = tempfile::tempdir().unwrap();
    let w = stdout_json(&zsafe(&["oracle", "walls"], dir.path()));
    assert!((w["raw_total_j"].as_f64().unwrap() - 1_674_682.0).abs() < 1.0);
    assert!((w["weighted_j"].as_f64().unwrap() - 558_227.0).abs() < 1.0);
    assert_eq!(w["positions"], 40.0);
    let t = stdout_json(&zsafe(&["oracle", "trees"], dir.path()));
    assert_eq!(t["raw_total_j"], 25_000_000.0);
}

#[test]
fn malformed_input_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("t.csv"),
        "time_s,vehicle_id,x_m,y_m,speed_kmh\n0,1,0,0,90\n1,1,25,0,-90\n",
    )
    .unwrap();
    let out = zsafe(&["validate", "--trajectories", "t.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let rec = stderr_record(&out);
    assert_eq!(rec["error"], "parse");
    assert!(rec["message"].as_str().unwrap().contains(":3:"), "{rec}");
}

#[test]
fn usage_errors_are_records_too() {
    let dir = tempfile::tempdir().unwrap();
    let out = zsafe(&["analyze", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_record(&out)["error"], "usage");

    let out = zsafe(&["generate", "wall-corridor", "--flow", "300"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_record(&out)["error"], "config");

    let out = zsafe(&["analyze", "--generator", "wall-corridor", "--indicator", "Z3-15-0.80"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
