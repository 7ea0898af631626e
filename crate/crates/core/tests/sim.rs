//! Closed-loop traces, artifacts and the command-line front end.

use std::path::{Path, PathBuf};
use std::process::Command;

use uavnav::model::{step_rk4, wrap_angle};
use uavnav::sim::{emit_csv, run_episode, EpisodeStatus, Scenario, SimError, TraceTable};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn load(name: &str) -> Scenario {
    Scenario::load(&scenario_path(name)).unwrap()
}

#[test]
fn trace_reintegrates_exactly() {
    // Each row's state is the plant step of the previous row with its input.
    let s = load("hover_mismatch.json");
    let trace = run_episode(&s).unwrap();
    assert_eq!(trace.status, EpisodeStatus::Success);
    for w in trace.records.windows(2) {
        let next = step_rk4(&w[0].state, &w[0].input, &trace.plant).unwrap();
        assert_eq!(next, w[1].state, "t = {}", w[0].t);
        assert!((w[1].t - w[0].t - trace.dt).abs() < 1e-12);
    }
}

#[test]
fn csv_round_trip_of_real_trace() {
    let s = load("dynamic_obstacle.json");
    let trace = run_episode(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    emit_csv(&trace, &path).unwrap();
    let table = TraceTable::read_csv(&path).unwrap();
    assert_eq!(table, TraceTable::from_trace(&trace));
    assert_eq!(table.rows.len(), trace.records.len());
    for (row, r) in table.rows.iter().zip(&trace.records) {
        // Errors are reference minus state.
        assert_eq!(row[12], r.reference.x - r.state.position.x);
        assert_eq!(row[13], r.reference.y - r.state.position.y);
        assert_eq!(row[14], r.reference.z - r.state.position.z);
        assert_eq!(row[15], wrap_angle(r.heading_ref - r.heading));
        assert_eq!(row[16], r.obs_dist_min);
    }
}

#[test]
fn scenario_rejection() {
    let base = std::fs::read_to_string(scenario_path("static_obstacle.json")).unwrap();
    let cases = [
        base.replace("\"name\"", "\"nmae\""),
        base.replace("\"radius\": 5", "\"radius\": -5"),
        base.replace("\"landmark\": \"waypoint\"", "\"landmark\": \"nowhere\""),
        base.replace("\"max_time\": 30", "\"max_time\": 0"),
        base.replace("\"radius\": 1.0", "\"radius\": 0.0"),
        base.replace("{ \"max_time\": 30 }", "{ \"max_time\": 30, \"speed\": 1 }"),
        "{".to_string(),
    ];
    for text in cases {
        assert_ne!(text, base);
        assert!(
            matches!(Scenario::from_json(&text), Err(SimError::Scenario(_))),
            "{text}"
        );
    }
}

#[test]
fn collision_halts_with_navigation_failure() {
    let mut s = load("static_obstacle.json");
    s.controller = uavnav::sim::ControllerKind::Pid;
    let trace = run_episode(&s).unwrap();
    assert_eq!(trace.status, EpisodeStatus::Collided);
    assert_eq!(trace.status.exit_code(), 2);
    assert!(trace.collided);
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_uavnav")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

#[test]
fn cli_run_plot_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let scenario = scenario_path("hover_waypoint.json");
    let (code, stdout) = cli(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(code, 0, "{stdout}");
    for f in ["trace.csv", "plots.svg", "summary.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let trace = out.join("trace.csv");
    let (code, stdout) = cli(&[
        "metrics",
        trace.to_str().unwrap(),
        "--scenario",
        scenario.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("SR             1"), "{stdout}");
    let (code, _) = cli(&["plot", trace.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.join("trace.svg").is_file());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = cli(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(code, 1);

    // An unreachable goal exhausts the time budget: navigation failure.
    let text = std::fs::read_to_string(scenario_path("hover_waypoint.json"))
        .unwrap()
        .replace("\"max_time\": 30", "\"max_time\": 1");
    let path = dir.path().join("short.json");
    std::fs::write(&path, text).unwrap();
    let (code, _) = cli(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);

    // Invalid solver settings are rejected before anything runs.
    let bad = std::fs::read_to_string(scenario_path("hover_waypoint.json"))
        .unwrap()
        .replace("\"limits\"", "\"solver\": { \"penalty_growth\": 0.5 }, \"limits\"");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, bad).unwrap();
    let (code, _) = cli(&["run", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(EpisodeStatus::Aborted.exit_code(), 3);
}
