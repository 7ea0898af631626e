//! Verbalizes where landmarks appear in the camera image from a fixed pose.

use nalgebra::Vector3;
use uavnav::model::{Pose, State};
use uavnav::navigator::{describe_view, Landmark};

fn main() {
    let pose = Pose::new(State::at_rest(Vector3::new(0.0, 0.0, 10.0)), 0.0);
    let lm = |name: &str, x, y, z| Landmark {
        name: name.into(),
        position: Vector3::new(x, y, z),
        radius: 1.0,
    };
    let landmarks = [
        lm("red house", 30.0, 0.0, 10.0),
        lm("water tower", 20.0, 15.0, 25.0),
        lm("bridge", 25.0, -18.0, 2.0),
        lm("antenna", -10.0, 0.0, 10.0),
        lm("far hill", 300.0, 0.0, 10.0),
    ];
    for d in describe_view(&pose, &landmarks, 90f64.to_radians(), 100.0) {
        println!("{d}  (row {}, col {}, range {:.1} m)", d.row(), d.col(), d.range);
    }
    println!("(antenna is behind the camera and far hill is out of range)");
}
