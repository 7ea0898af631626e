//! Flies a scenario with the NMPC and the PID baseline and prints a
//! side-by-side summary.
//!
//! `cargo run --release --example closed_loop -- scenarios/dynamic_obstacle.json`

use std::path::PathBuf;

use uavnav::sim::episode::build_controller;
use uavnav::sim::metrics::{encounter_time, max_tracking_error_after};
use uavnav::sim::{compute_metrics, run_episode_with, ControllerKind, Scenario};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/dynamic_obstacle.json")));
    let mut scenario = Scenario::load(&path).expect("scenario");
    scenario.limits.halt_on_collision = false;
    let t_enc = encounter_time(&scenario, scenario.model.dt);
    println!(
        "{} (encounter at {})",
        scenario.name,
        t_enc.map_or("-".into(), |t| format!("{t:.2} s"))
    );
    for kind in [ControllerKind::Nmpc, ControllerKind::Pid] {
        let mut controller = build_controller(&scenario, kind);
        let trace = run_episode_with(&scenario, controller.as_mut()).expect("episode");
        let m = compute_metrics(&trace, &scenario, scenario.reference_length());
        println!(
            "{:>5}: {:?}{}  NE {:.3} m  SPL {:.3}  clearance {:.3} m  post-encounter error {:.3} m",
            trace.controller,
            trace.status,
            if trace.collided { " (collided)" } else { "" },
            m.ne,
            m.spl,
            m.min_clearance,
            max_tracking_error_after(&trace, t_enc.unwrap_or(0.0)),
        );
    }
}
