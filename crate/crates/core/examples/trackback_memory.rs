//! Navigates an ambiguous instruction with and without a remembered route
//! (kinematic rollout, no dynamics) and shows the backtracked path.

use nalgebra::Vector3;
use uavnav::model::{ModelParams, Pose, State};
use uavnav::navigator::{run_kinematic, Landmark, MemoryGraph, Navigator, NavigatorConfig, RuleReasoner};

fn main() {
    let lm = |name: &str, x, y| Landmark {
        name: name.into(),
        position: Vector3::new(x, y, 10.0),
        radius: 2.0,
    };
    let landmarks = [lm("gate", 60.0, 0.0), lm("blue tower", 60.0, 110.0)];
    let mut graph = MemoryGraph::new();
    graph.upsert_node("start", Some(Vector3::new(0.0, 0.0, 10.0)));
    graph.upsert_node("gate", Some(landmarks[0].position));
    graph.upsert_node("blue tower", Some(landmarks[1].position));
    graph
        .record("start", "gate", "go straight past the gate", 60.0)
        .unwrap();
    graph
        .record("gate", "blue tower", "turn left at the gate", 110.0)
        .unwrap();
    graph.current = Some("start".into());

    let route: Vec<String> = graph
        .backtrack("start", "blue tower")
        .unwrap()
        .iter()
        .map(|e| format!("{} -> {} ({:?})", e.from, e.to, e.fragment))
        .collect();
    println!("remembered route: {}", route.join(", "));

    let instruction = "turn left, then move right, then go straight";
    for memory in [true, false] {
        let config = NavigatorConfig {
            memory,
            ..NavigatorConfig::default()
        };
        let mut nav = Navigator::new(config, Box::new(RuleReasoner), instruction, "blue tower", graph.clone());
        let start = Pose::new(State::at_rest(Vector3::new(0.0, 0.0, 10.0)), 0.0);
        let out = run_kinematic(&mut nav, start, &landmarks, &ModelParams::default());
        let actions: Vec<String> = out.actions.iter().map(|a| a.to_string()).collect();
        println!(
            "memory {memory}: {} actions, stopped {}: {}",
            actions.len(),
            out.stopped,
            actions.join(" ")
        );
    }
}
