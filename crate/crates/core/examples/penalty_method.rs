//! Quadratic-penalty outer loop on `min z^2 s.t. z = 1`: the minimizer at
//! weight `mu` is `mu / (1 + mu)`, so the residual shrinks as `mu` grows.

use uavnav::ocp::ConstraintResiduals;
use uavnav::panoc::penalty::{penalty_solve_with, PenaltyProblem};
use uavnav::panoc::{PanocSolver, SolveStatus, SolverConfig, SolverError};

struct Scalar;

impl PenaltyProblem for Scalar {
    fn dim(&self) -> usize {
        1
    }
    fn project(&self, z: &mut [f64]) {
        z[0] = z[0].clamp(-10.0, 10.0);
    }
    fn value_and_gradient(&self, z: &[f64], mu: f64, g: &mut [f64]) -> Result<f64, SolverError> {
        g[0] = 2.0 * z[0] + 2.0 * mu * (z[0] - 1.0);
        Ok(z[0] * z[0] + mu * (z[0] - 1.0).powi(2))
    }
    fn cost(&self, z: &[f64]) -> Result<f64, SolverError> {
        Ok(z[0] * z[0])
    }
    fn residuals(&self, z: &[f64]) -> Result<ConstraintResiduals, SolverError> {
        Ok(ConstraintResiduals {
            obstacle: (z[0] - 1.0).abs(),
            rate: 0.0,
        })
    }
}

fn main() {
    let base = SolverConfig::default();
    for rounds in 1..=base.max_outer_iterations {
        let config = SolverConfig {
            max_outer_iterations: rounds,
            ..base
        };
        let s = penalty_solve_with(&mut PanocSolver::new(config), &Scalar, &[0.0]).expect("solve");
        println!(
            "rounds {rounds}: mu = {:>8.0}  z = {:.6}  mu/(1+mu) = {:.6}  residual {:.2e}  {:?}",
            s.penalty,
            s.z[0],
            s.penalty / (1.0 + s.penalty),
            s.residuals.obstacle,
            s.status
        );
        if s.status == SolveStatus::Converged {
            break;
        }
    }
}
