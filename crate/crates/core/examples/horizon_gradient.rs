//! Builds one horizon problem with a moving obstacle and compares the
//! adjoint gradient against central finite differences.

use nalgebra::Vector3;
use uavnav::model::{Input, ModelParams, State};
use uavnav::obstacle::ObstacleSpec;
use uavnav::ocp::{CostWeights, HorizonProblem, ParamVector};

fn main() {
    let n = 40;
    let m = ModelParams::default();
    let x0 = State::at_rest(Vector3::new(0.0, 0.0, 10.0));
    let mut x_ref = x0;
    x_ref.position.x = 5.0;
    let obstacle = ObstacleSpec {
        radius: 1.0,
        safety_radius: 0.5,
        centers: (0..=n)
            .map(|k| Vector3::new(2.0, -1.0 + 0.05 * k as f64, 10.0))
            .collect(),
    };
    let p = HorizonProblem::new(
        n,
        m,
        CostWeights::default(),
        ParamVector {
            x0,
            x_ref,
            u_ref: Input::hover(&m),
            u_prev: Input::hover(&m),
            obstacles: vec![obstacle],
            mu: 100.0,
        },
    )
    .expect("valid problem");
    let z: Vec<f64> = p
        .hover_guess()
        .iter()
        .enumerate()
        .map(|(i, v)| v + 0.08 * (1.7 * i as f64).sin())
        .collect();
    let g = p.eval_gradient(&z).expect("gradient");
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..z.len() {
        let (mut a, mut b) = (z.clone(), z.clone());
        a[i] += h;
        b[i] -= h;
        let fd = (p.eval_objective(&a).unwrap() - p.eval_objective(&b).unwrap()) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / fd.abs().max(1.0));
    }
    println!(
        "objective {:.6}, |grad| {:.4}",
        p.eval_objective(&z).unwrap(),
        g.iter().map(|v| v * v).sum::<f64>().sqrt()
    );
    println!(
        "largest relative deviation from finite differences over {} entries: {worst:.2e}",
        z.len()
    );
}
