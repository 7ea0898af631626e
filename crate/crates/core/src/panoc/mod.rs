//! PANOC: projected gradient steps accelerated by L-BFGS directions, with a
//! line search on the forward-backward envelope (FBE).
//!
//! The inner solver minimizes a smooth `f` over a set with a cheap
//! projection. [`penalty`] wraps it in the quadratic-penalty outer loop used
//! for the obstacle and rate constraints.

mod lbfgs;
pub mod penalty;

pub use lbfgs::Lbfgs;
pub use penalty::{penalty_solve, penalty_solve_with, warm_start_shift, HorizonPenalty, PenaltyProblem, Solution};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelParams;
use crate::ocp::OcpError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("objective evaluation failed: {0}")]
    Evaluation(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

impl From<OcpError> for SolverError {
    fn from(e: OcpError) -> Self {
        SolverError::Evaluation(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Fixed-point residual tolerance `|z - prox(z - g*grad)|_inf / g`.
    pub tolerance: f64,
    pub max_inner_iterations: usize,
    pub lbfgs_memory: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    /// Tolerance on the largest `h_sphere` value (m^2).
    pub obstacle_tolerance: f64,
    /// Tolerance on rate-limit excess (rad).
    pub rate_tolerance: f64,
    pub max_outer_iterations: usize,
    pub backtracking_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_inner_iterations: 500,
            lbfgs_memory: 10,
            initial_penalty: 10.0,
            penalty_growth: 5.0,
            obstacle_tolerance: 1e-3,
            rate_tolerance: 1e-4,
            max_outer_iterations: 8,
            backtracking_factor: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            self.tolerance,
            self.initial_penalty,
            self.obstacle_tolerance,
            self.rate_tolerance,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err("tolerances and initial penalty must be positive".into());
        }
        if !(self.penalty_growth > 1.0) {
            return Err("penalty growth factor must exceed 1".into());
        }
        if !(self.backtracking_factor > 0.0 && self.backtracking_factor < 1.0) {
            return Err("backtracking factor must lie in (0, 1)".into());
        }
        if self.max_inner_iterations == 0 || self.max_outer_iterations == 0 {
            return Err("iteration budgets must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Diverged,
}

/// Smooth objective with gradient.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value_and_gradient(&self, z: &[f64], grad: &mut [f64]) -> Result<f64, SolverError>;

    fn value(&self, z: &[f64]) -> Result<f64, SolverError> {
        let mut g = vec![0.0; z.len()];
        self.value_and_gradient(z, &mut g)
    }
}

/// Adapts a closure `(z, grad) -> f(z)` that fills `grad`.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_and_gradient(&self, z: &[f64], grad: &mut [f64]) -> Result<f64, SolverError> {
        Ok((self.f)(z, grad))
    }
}

pub trait Projection {
    fn project(&self, z: &mut [f64]);
}

/// Componentwise box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// Input bounds of `params` repeated over `horizon` steps.
    pub fn inputs(params: &ModelParams, horizon: usize) -> Self {
        let lo = [params.thrust_min, -params.roll_max, -params.pitch_max];
        let hi = [params.thrust_max, params.roll_max, params.pitch_max];
        Self::new(
            lo.iter().copied().cycle().take(3 * horizon).collect(),
            hi.iter().copied().cycle().take(3 * horizon).collect(),
        )
    }
}

impl Projection for BoxSet {
    fn project(&self, z: &mut [f64]) {
        for ((v, lo), hi) in z.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// Clamps each input triple of `z` into the box bounds of `params`.
pub fn project_box(z: &mut [f64], params: &ModelParams) {
    BoxSet::inputs(params, z.len() / 3).project(z);
}

/// FBE value and step size at one accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbeRecord {
    pub gamma: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub z: Vec<f64>,
    pub value: f64,
    pub fixed_point_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub fbe_history: Vec<FbeRecord>,
}

const GAMMA_L: f64 = 0.95;
const MAX_LINE_SEARCH: usize = 10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Point `z` with its gradient, forward-backward step and residual `z - zbar`.
struct Iterate {
    z: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    zbar: Vec<f64>,
    residual: Vec<f64>,
}

impl Iterate {
    fn evaluate<O: Objective>(f: &O, z: Vec<f64>) -> Result<Self, SolverError> {
        let mut grad = vec![0.0; z.len()];
        let value = f.value_and_gradient(&z, &mut grad)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(SolverError::Evaluation("non-finite objective".into()));
        }
        let n = z.len();
        Ok(Self {
            z,
            value,
            grad,
            zbar: vec![0.0; n],
            residual: vec![0.0; n],
        })
    }

    fn forward_backward<P: Projection>(&mut self, set: &P, gamma: f64) {
        for i in 0..self.z.len() {
            self.zbar[i] = self.z[i] - gamma * self.grad[i];
        }
        set.project(&mut self.zbar);
        for i in 0..self.z.len() {
            self.residual[i] = self.z[i] - self.zbar[i];
        }
    }

    /// `f(z) + grad'(zbar - z) + |zbar - z|^2 / (2 gamma)`.
    fn fbe(&self, gamma: f64) -> f64 {
        self.value - dot(&self.grad, &self.residual) + dot(&self.residual, &self.residual) / (2.0 * gamma)
    }
}

fn lipschitz_estimate<O: Objective>(f: &O, it: &Iterate) -> Result<f64, SolverError> {
    let probe: Vec<f64> = it.z.iter().map(|z| z + (1e-6 * z.abs()).max(1e-6)).collect();
    let mut g2 = vec![0.0; probe.len()];
    f.value_and_gradient(&probe, &mut g2)?;
    let dz: f64 = probe
        .iter()
        .zip(&it.z)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let dg: f64 = g2
        .iter()
        .zip(&it.grad)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let l = dg / dz;
    Ok(if l.is_finite() && l > 1e-8 { l } else { 1e-8 })
}

/// Owns the L-BFGS workspace; one solve at a time.
#[derive(Debug, Clone)]
pub struct PanocSolver {
    config: SolverConfig,
    lbfgs: Lbfgs,
}

impl PanocSolver {
    pub fn new(config: SolverConfig) -> Self {
        Self {
            lbfgs: Lbfgs::new(config.lbfgs_memory),
            config,
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Minimizes `f` over `set` starting from the projection of `z0`.
    pub fn solve<O: Objective, P: Projection>(
        &mut self,
        f: &O,
        set: &P,
        z0: &[f64],
    ) -> Result<InnerSolution, SolverError> {
        if z0.len() != f.dim() {
            return Err(SolverError::Dimension {
                expected: f.dim(),
                got: z0.len(),
            });
        }
        self.lbfgs.reset();
        let cfg = self.config;
        let mut z = z0.to_vec();
        set.project(&mut z);

        let diverged = |z: Vec<f64>, iterations, history| InnerSolution {
            z,
            value: f64::NAN,
            fixed_point_residual: f64::INFINITY,
            iterations,
            status: SolveStatus::Diverged,
            fbe_history: history,
        };

        let mut it = match Iterate::evaluate(f, z.clone()) {
            Ok(it) => it,
            Err(_) => return Ok(diverged(z, 0, Vec::new())),
        };
        let mut lipschitz = match lipschitz_estimate(f, &it) {
            Ok(l) => l,
            Err(_) => return Ok(diverged(z, 0, Vec::new())),
        };
        let mut gamma = GAMMA_L / lipschitz;
        let mut history = Vec::new();
        let mut iterations = 0;
        let mut direction = vec![0.0; z.len()];
        let mut candidate = vec![0.0; z.len()];

        loop {
            it.forward_backward(set, gamma);

            // Tighten the step until the quadratic upper bound holds at zbar.
            loop {
                let fbar = match f.value(&it.zbar) {
                    Ok(v) if v.is_finite() => v,
                    _ => f64::INFINITY,
                };
                let rr = dot(&it.residual, &it.residual);
                let bound = it.value - dot(&it.grad, &it.residual) + 0.5 * lipschitz * rr;
                if fbar <= bound + 1e-12 * it.value.abs().max(1.0) || rr == 0.0 {
                    break;
                }
                lipschitz *= 2.0;
                gamma *= 0.5;
                self.lbfgs.reset();
                it.forward_backward(set, gamma);
                if gamma < 1e-20 {
                    return Ok(diverged(it.z, iterations, history));
                }
            }

            let fpr = inf_norm(&it.residual) / gamma;
            let fbe = it.fbe(gamma);
            history.push(FbeRecord { gamma, value: fbe });
            if fpr <= cfg.tolerance {
                return Ok(InnerSolution {
                    value: it.value,
                    z: it.z,
                    fixed_point_residual: fpr,
                    iterations,
                    status: SolveStatus::Converged,
                    fbe_history: history,
                });
            }
            if iterations >= cfg.max_inner_iterations {
                return Ok(InnerSolution {
                    value: it.value,
                    z: it.z,
                    fixed_point_residual: fpr,
                    iterations,
                    status: SolveStatus::MaxIterations,
                    fbe_history: history,
                });
            }
            iterations += 1;

            // Quasi-Newton direction on the fixed-point residual.
            direction.copy_from_slice(&it.residual);
            self.lbfgs.apply(&mut direction);
            direction.iter_mut().for_each(|d| *d = -*d);

            let rr = dot(&it.residual, &it.residual);
            let sigma = (1.0 - gamma * lipschitz) / (4.0 * gamma);
            let threshold = fbe - sigma * rr;
            let mut tau = if self.lbfgs.is_empty() { 0.0 } else { 1.0 };
            let mut accepted = None;
            for attempt in 0..=MAX_LINE_SEARCH {
                if attempt == MAX_LINE_SEARCH {
                    tau = 0.0;
                }
                for i in 0..candidate.len() {
                    candidate[i] = it.z[i] - (1.0 - tau) * it.residual[i] + tau * direction[i];
                }
                if let Ok(mut next) = Iterate::evaluate(f, candidate.clone()) {
                    next.forward_backward(set, gamma);
                    if tau == 0.0 || next.fbe(gamma) <= threshold {
                        accepted = Some(next);
                        break;
                    }
                } else if tau == 0.0 {
                    break;
                }
                tau *= cfg.backtracking_factor;
            }
            let Some(next) = accepted else {
                return Ok(diverged(it.z, iterations, history));
            };

            let s: Vec<f64> = next.z.iter().zip(&it.z).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next.residual.iter().zip(&it.residual).map(|(a, b)| a - b).collect();
            self.lbfgs.update(s, y, rr.sqrt());
            it = next;
        }
    }
}

/// Plain projected gradient with the same step-size rule and stopping test.
/// Kept as a baseline for iteration-count comparisons.
pub fn projected_gradient<O: Objective, P: Projection>(
    f: &O,
    set: &P,
    z0: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<InnerSolution, SolverError> {
    let mut z = z0.to_vec();
    set.project(&mut z);
    let mut it = Iterate::evaluate(f, z)?;
    let mut lipschitz = lipschitz_estimate(f, &it)?;
    let mut gamma = GAMMA_L / lipschitz;
    let mut iterations = 0;
    loop {
        it.forward_backward(set, gamma);
        loop {
            let fbar = f.value(&it.zbar).unwrap_or(f64::INFINITY);
            let rr = dot(&it.residual, &it.residual);
            let bound = it.value - dot(&it.grad, &it.residual) + 0.5 * lipschitz * rr;
            if fbar <= bound + 1e-12 * it.value.abs().max(1.0) || rr == 0.0 {
                break;
            }
            lipschitz *= 2.0;
            gamma *= 0.5;
            it.forward_backward(set, gamma);
        }
        let fpr = inf_norm(&it.residual) / gamma;
        if fpr <= tolerance || iterations >= max_iterations {
            let status = if fpr <= tolerance {
                SolveStatus::Converged
            } else {
                SolveStatus::MaxIterations
            };
            return Ok(InnerSolution {
                value: it.value,
                z: it.z,
                fixed_point_residual: fpr,
                iterations,
                status,
                fbe_history: Vec::new(),
            });
        }
        iterations += 1;
        it = Iterate::evaluate(f, it.zbar.clone())?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_quadratic() -> FnObjective<impl Fn(&[f64], &mut [f64]) -> f64> {
        FnObjective::new(1, |z: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (z[0] - 3.0);
            (z[0] - 3.0).powi(2)
        })
    }

    fn rosenbrock() -> FnObjective<impl Fn(&[f64], &mut [f64]) -> f64> {
        FnObjective::new(2, |z: &[f64], g: &mut [f64]| {
            let (a, b) = (z[0], z[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        })
    }

    fn tight() -> SolverConfig {
        SolverConfig {
            tolerance: 1e-8,
            max_inner_iterations: 2000,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn scalar_interior_and_clamped() {
        let mut s = PanocSolver::new(tight());
        let r = s
            .solve(&scalar_quadratic(), &BoxSet::uniform(1, 0.0, 10.0), &[0.0])
            .unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.z[0] - 3.0).abs() < 1e-6);
        let r = s
            .solve(&scalar_quadratic(), &BoxSet::uniform(1, 0.0, 2.0), &[0.0])
            .unwrap();
        assert_eq!(r.z[0], 2.0);
    }

    #[test]
    fn rosenbrock_beats_projected_gradient() {
        let cfg = SolverConfig {
            tolerance: 1e-6,
            max_inner_iterations: 5000,
            ..SolverConfig::default()
        };
        let set = BoxSet::uniform(2, -5.0, 5.0);
        let r = PanocSolver::new(cfg).solve(&rosenbrock(), &set, &[-1.2, 1.0]).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.z[0] - 1.0).abs() < 1e-4 && (r.z[1] - 1.0).abs() < 1e-4, "{:?}", r.z);
        let pg = projected_gradient(&rosenbrock(), &set, &[-1.2, 1.0], 1e-6, 200_000).unwrap();
        assert!(
            r.iterations < pg.iterations,
            "panoc {} pg {}",
            r.iterations,
            pg.iterations
        );
    }

    #[test]
    fn fbe_monotone_at_fixed_gamma() {
        let set = BoxSet::uniform(2, -5.0, 5.0);
        let r = PanocSolver::new(tight())
            .solve(&rosenbrock(), &set, &[-1.2, 1.0])
            .unwrap();
        for w in r.fbe_history.windows(2) {
            if w[0].gamma == w[1].gamma {
                assert!(w[1].value <= w[0].value + 1e-12 * w[0].value.abs().max(1.0));
            }
        }
    }

    #[test]
    fn projection_properties() {
        let m = ModelParams::default();
        let mut z = vec![10.0, 0.1, -0.2, -1.0, 1.0, -1.0];
        let inside = z[..3].to_vec();
        project_box(&mut z, &m);
        assert_eq!(&z[..3], inside.as_slice());
        assert_eq!(z[3], m.thrust_min);
        assert_eq!(z[4], m.roll_max);
        assert_eq!(z[5], -m.pitch_max);
        let once = z.clone();
        project_box(&mut z, &m);
        assert_eq!(z, once);
    }

    #[test]
    fn non_finite_objective_reports_divergence() {
        let f = FnObjective::new(1, |z: &[f64], g: &mut [f64]| {
            g[0] = 1.0;
            if z[0] > 0.5 {
                f64::NAN
            } else {
                z[0]
            }
        });
        let r = PanocSolver::new(SolverConfig::default())
            .solve(&f, &BoxSet::uniform(1, -1.0, 1.0), &[0.9])
            .unwrap();
        assert_eq!(r.status, SolveStatus::Diverged);
    }

    #[test]
    fn dimension_mismatch() {
        let e = PanocSolver::new(SolverConfig::default()).solve(
            &scalar_quadratic(),
            &BoxSet::uniform(1, 0.0, 1.0),
            &[0.0, 1.0],
        );
        assert!(matches!(e, Err(SolverError::Dimension { .. })));
    }

    #[test]
    fn deterministic() {
        let set = BoxSet::uniform(2, -5.0, 5.0);
        let a = PanocSolver::new(tight())
            .solve(&rosenbrock(), &set, &[-1.2, 1.0])
            .unwrap();
        let b = PanocSolver::new(tight())
            .solve(&rosenbrock(), &set, &[-1.2, 1.0])
            .unwrap();
        assert_eq!(a, b);
    }
}
