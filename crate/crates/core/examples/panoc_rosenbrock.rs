//! Minimizes the 2-D Rosenbrock function over a box with PANOC and prints
//! the forward-backward envelope along the accepted iterates.

use uavnav::panoc::{BoxSet, FnObjective, PanocSolver, SolverConfig};

fn main() {
    let f = FnObjective::new(2, |z: &[f64], g: &mut [f64]| {
        let (x, y) = (z[0], z[1]);
        g[0] = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
        g[1] = 200.0 * (y - x * x);
        (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
    });
    let config = SolverConfig {
        tolerance: 1e-8,
        max_inner_iterations: 2000,
        ..SolverConfig::default()
    };
    let mut solver = PanocSolver::new(config);
    let s = solver
        .solve(&f, &BoxSet::uniform(2, -2.0, 2.0), &[-1.2, 1.0])
        .expect("solve");
    println!("status {:?} after {} iterations", s.status, s.iterations);
    println!("z* = ({:.8}, {:.8}), f = {:.3e}", s.z[0], s.z[1], s.value);
    for (i, r) in s
        .fbe_history
        .iter()
        .enumerate()
        .step_by((s.fbe_history.len() / 10).max(1))
    {
        println!("  iter {i:4}  gamma {:.3e}  FBE {:.6e}", r.gamma, r.value);
    }
}
