//! Quadratic-penalty outer loop: solve with PANOC, check residuals, grow
//! the penalty weight and re-solve warm-started until the constraints pass.

use super::{BoxSet, InnerSolution, Objective, PanocSolver, Projection, SolveStatus, SolverConfig, SolverError};
use crate::model::ModelParams;
use crate::ocp::{ConstraintResiduals, HorizonProblem};

/// A problem whose constraints are folded into the objective with weight `mu`.
pub trait PenaltyProblem {
    fn dim(&self) -> usize;
    fn project(&self, z: &mut [f64]);
    /// Penalized objective and its gradient at weight `mu`.
    fn value_and_gradient(&self, z: &[f64], mu: f64, grad: &mut [f64]) -> Result<f64, SolverError>;
    /// Unpenalized cost.
    fn cost(&self, z: &[f64]) -> Result<f64, SolverError>;
    fn residuals(&self, z: &[f64]) -> Result<ConstraintResiduals, SolverError>;
    /// Starting weight; `None` uses the solver configuration.
    fn initial_penalty(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub z: Vec<f64>,
    /// Unpenalized cost at `z`.
    pub cost: f64,
    pub residuals: ConstraintResiduals,
    pub fixed_point_residual: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    /// Penalty weight of the last inner solve.
    pub penalty: f64,
    pub status: SolveStatus,
}

struct AtWeight<'a, P> {
    problem: &'a P,
    mu: f64,
}

impl<P: PenaltyProblem> Objective for AtWeight<'_, P> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn value_and_gradient(&self, z: &[f64], grad: &mut [f64]) -> Result<f64, SolverError> {
        self.problem.value_and_gradient(z, self.mu, grad)
    }
}

struct ProjectVia<'a, P>(&'a P);

impl<P: PenaltyProblem> Projection for ProjectVia<'_, P> {
    fn project(&self, z: &mut [f64]) {
        self.0.project(z)
    }
}

/// Runs the penalty loop with an existing solver instance.
pub fn penalty_solve_with<P: PenaltyProblem>(
    solver: &mut PanocSolver,
    problem: &P,
    z0: &[f64],
) -> Result<Solution, SolverError> {
    let cfg = *solver.config();
    let mut mu = problem
        .initial_penalty()
        .filter(|m| *m > 0.0)
        .unwrap_or(cfg.initial_penalty);
    let mut z = z0.to_vec();
    let mut inner_total = 0;
    let mut last: Option<(InnerSolution, ConstraintResiduals)> = None;

    for outer in 1..=cfg.max_outer_iterations {
        let inner = solver.solve(&AtWeight { problem, mu }, &ProjectVia(problem), &z)?;
        inner_total += inner.iterations;
        if inner.status == SolveStatus::Diverged {
            // Keep the best finite iterate from earlier rounds, if any.
            let (z, residuals, fpr) = match &last {
                Some((s, r)) => (s.z.clone(), *r, s.fixed_point_residual),
                None => (z, ConstraintResiduals::default(), f64::INFINITY),
            };
            let cost = problem.cost(&z).unwrap_or(f64::NAN);
            return Ok(Solution {
                z,
                cost,
                residuals,
                fixed_point_residual: fpr,
                inner_iterations: inner_total,
                outer_iterations: outer,
                penalty: mu,
                status: SolveStatus::Diverged,
            });
        }
        let residuals = problem.residuals(&inner.z)?;
        let feasible = residuals.obstacle <= cfg.obstacle_tolerance && residuals.rate <= cfg.rate_tolerance;
        if feasible || outer == cfg.max_outer_iterations {
            let status = if feasible && inner.status == SolveStatus::Converged {
                SolveStatus::Converged
            } else {
                SolveStatus::MaxIterations
            };
            return Ok(Solution {
                cost: problem.cost(&inner.z)?,
                z: inner.z,
                residuals,
                fixed_point_residual: inner.fixed_point_residual,
                inner_iterations: inner_total,
                outer_iterations: outer,
                penalty: mu,
                status,
            });
        }
        z.clone_from(&inner.z);
        last = Some((inner, residuals));
        mu *= cfg.penalty_growth;
    }
    unreachable!("outer loop always returns on its last iteration")
}

/// Solves a horizon problem with a fresh solver instance.
pub fn penalty_solve(problem: &HorizonProblem, z0: &[f64], config: &SolverConfig) -> Result<Solution, SolverError> {
    let mut solver = PanocSolver::new(*config);
    penalty_solve_with(&mut solver, &HorizonPenalty::new(problem), z0)
}

/// [`PenaltyProblem`] view of a [`HorizonProblem`] with the input box.
pub struct HorizonPenalty<'a> {
    problem: &'a HorizonProblem,
    bounds: BoxSet,
}

impl<'a> HorizonPenalty<'a> {
    pub fn new(problem: &'a HorizonProblem) -> Self {
        Self {
            bounds: BoxSet::inputs(problem.model(), problem.horizon()),
            problem,
        }
    }
}

impl PenaltyProblem for HorizonPenalty<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn project(&self, z: &mut [f64]) {
        self.bounds.project(z)
    }

    fn value_and_gradient(&self, z: &[f64], mu: f64, grad: &mut [f64]) -> Result<f64, SolverError> {
        if mu == self.problem.mu() {
            Ok(self.problem.value_and_gradient(z, grad)?)
        } else {
            Ok(self.problem.with_mu(mu).value_and_gradient(z, grad)?)
        }
    }

    fn cost(&self, z: &[f64]) -> Result<f64, SolverError> {
        Ok(self.problem.eval_cost(z)?)
    }

    fn residuals(&self, z: &[f64]) -> Result<ConstraintResiduals, SolverError> {
        Ok(self.problem.residuals(z)?)
    }

    fn initial_penalty(&self) -> Option<f64> {
        Some(self.problem.mu())
    }
}

/// Receding-horizon warm start: drop the first input, repeat the last, project.
pub fn warm_start_shift(z_prev: &[f64], params: &ModelParams) -> Vec<f64> {
    let mut z = Vec::with_capacity(z_prev.len());
    if z_prev.len() >= 3 {
        z.extend_from_slice(&z_prev[3..]);
        z.extend_from_slice(&z_prev[z_prev.len() - 3..]);
    }
    super::project_box(&mut z, params);
    z
}
