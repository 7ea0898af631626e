//! Open-loop rollouts of the translational model: hover equilibrium, free
//! fall, and a pitched hover drifting forward.

use nalgebra::Vector3;
use uavnav::model::{rollout, Input, ModelParams, State};

fn main() {
    let m = ModelParams::default();
    let x0 = State::at_rest(Vector3::new(0.0, 0.0, 10.0));
    let cases = [
        ("hover", Input::hover(&m)),
        ("free fall", Input::new(0.0, 0.0, 0.0)),
        ("pitched", Input::new(m.gravity / 0.2f64.cos(), 0.0, 0.2)),
    ];
    for (name, u) in cases {
        let xs = rollout(&x0, &vec![u; 40], &m).expect("finite rollout");
        let x = xs.last().unwrap();
        println!(
            "{name:>9}: after {:.1} s  p = ({:+.3}, {:+.3}, {:+.3})  v = ({:+.3}, {:+.3}, {:+.3})  theta = {:.4}",
            40.0 * m.dt,
            x.position.x,
            x.position.y,
            x.position.z,
            x.velocity.x,
            x.velocity.y,
            x.velocity.z,
            x.pitch
        );
    }
}
