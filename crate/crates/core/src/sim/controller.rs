//! Closed-loop controllers: the receding-horizon NMPC and a cascaded PID
//! baseline that ignores obstacles.

use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::model::{Input, ModelParams, State};
use crate::obstacle::{ObstacleTrack, TrajectoryPredictor};
use crate::ocp::{CostWeights, HorizonProblem, ParamVector};
use crate::panoc::{
    penalty_solve_with, warm_start_shift, HorizonPenalty, PanocSolver, SolveStatus, SolverConfig, SolverError,
};

/// Setpoint handed to a controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub state: State,
    pub input: Input,
}

impl Reference {
    pub fn hover_at(position: Vector3<f64>, params: &ModelParams) -> Self {
        Self {
            state: State::at_rest(position),
            input: Input::hover(params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub status: SolveStatus,
    pub cost: f64,
    pub obstacle_residual: f64,
    pub rate_residual: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub penalty: f64,
    /// The solved first input broke the rate limits and was clipped.
    pub rate_limited: bool,
    /// Wall-clock time of the solve in milliseconds.
    pub solve_ms: f64,
}

pub trait Controller {
    fn name(&self) -> &'static str;

    /// Computes the input to apply for the next step.
    fn control(
        &mut self,
        state: &State,
        reference: &Reference,
        obstacles: &[ObstacleTrack],
    ) -> Result<(Input, SolveDiagnostics), SolverError>;
}

pub struct NmpcController<P> {
    model: ModelParams,
    weights: CostWeights,
    horizon: usize,
    solver: PanocSolver,
    predictor: P,
    warm: Option<Vec<f64>>,
    u_prev: Input,
    penalty: f64,
}

impl<P: TrajectoryPredictor> NmpcController<P> {
    pub fn new(model: ModelParams, weights: CostWeights, horizon: usize, config: SolverConfig, predictor: P) -> Self {
        Self {
            u_prev: Input::hover(&model),
            penalty: config.initial_penalty,
            solver: PanocSolver::new(config),
            model,
            weights,
            horizon,
            predictor,
            warm: None,
        }
    }

    /// Input applied at the previous step (hover before the first solve).
    pub fn previous_input(&self) -> Input {
        self.u_prev
    }

    pub fn build_problem(
        &self,
        state: &State,
        reference: &Reference,
        obstacles: &[ObstacleTrack],
    ) -> Result<HorizonProblem, SolverError> {
        let specs = obstacles
            .iter()
            .map(|o| self.predictor.predict(o, self.model.dt, self.horizon))
            .collect();
        let params = ParamVector {
            x0: *state,
            x_ref: reference.state,
            u_ref: reference.input,
            u_prev: self.u_prev,
            obstacles: specs,
            mu: self.penalty,
        };
        Ok(HorizonProblem::new(self.horizon, self.model, self.weights, params)?)
    }
}

impl<P: TrajectoryPredictor> Controller for NmpcController<P> {
    fn name(&self) -> &'static str {
        "nmpc"
    }

    fn control(
        &mut self,
        state: &State,
        reference: &Reference,
        obstacles: &[ObstacleTrack],
    ) -> Result<(Input, SolveDiagnostics), SolverError> {
        let started = Instant::now();
        let problem = self.build_problem(state, reference, obstacles)?;
        let z0 = match &self.warm {
            Some(prev) => warm_start_shift(prev, &self.model),
            None => problem.hover_guess(),
        };
        let solution = penalty_solve_with(&mut self.solver, &HorizonPenalty::new(&problem), &z0)?;
        let solve_ms = started.elapsed().as_secs_f64() * 1e3;

        let (input, rate_limited) = certify_rate(
            Input::from_slice(&solution.z[..3]),
            &self.u_prev,
            &self.model,
            self.solver.config().rate_tolerance,
        );
        let initial = self.solver.config().initial_penalty;
        let growth = self.solver.config().penalty_growth;
        // Start the next solve one escalation below where this one ended.
        self.penalty = (solution.penalty / growth).max(initial);
        self.u_prev = input;
        self.warm = Some(solution.z.clone());
        Ok((
            input,
            SolveDiagnostics {
                status: solution.status,
                cost: solution.cost,
                obstacle_residual: solution.residuals.obstacle,
                rate_residual: solution.residuals.rate,
                inner_iterations: solution.inner_iterations,
                outer_iterations: solution.outer_iterations,
                penalty: solution.penalty,
                rate_limited,
                solve_ms,
            },
        ))
    }
}

/// Post-solve audit of the input about to be applied. If the roll/pitch
/// references move further than the per-step limit (plus `tolerance`) from
/// the previous input, they are clipped onto the limit.
pub fn certify_rate(u: Input, prev: &Input, m: &ModelParams, tolerance: f64) -> (Input, bool) {
    let dr = u.roll_ref - prev.roll_ref;
    let dp = u.pitch_ref - prev.pitch_ref;
    if dr.abs() <= m.roll_rate_max + tolerance && dp.abs() <= m.pitch_rate_max + tolerance {
        return (u, false);
    }
    let clipped = Input::new(
        u.thrust,
        (prev.roll_ref + dr.clamp(-m.roll_rate_max, m.roll_rate_max)).clamp(-m.roll_max, m.roll_max),
        (prev.pitch_ref + dp.clamp(-m.pitch_rate_max, m.pitch_rate_max)).clamp(-m.pitch_max, m.pitch_max),
    );
    (clipped, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub kp: Vector3<f64>,
    pub ki: Vector3<f64>,
    pub kd: Vector3<f64>,
    /// Anti-windup bound on the integral state (m*s).
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: Vector3::new(0.8, 0.8, 2.0),
            ki: Vector3::new(0.05, 0.05, 0.3),
            kd: Vector3::new(1.4, 1.4, 2.5),
            integral_limit: 5.0,
        }
    }
}

/// Position PID producing an acceleration demand, mapped to thrust and
/// attitude references with the same box and rate limits as the NMPC.
pub struct PidController {
    model: ModelParams,
    gains: PidGains,
    integral: Vector3<f64>,
    u_prev: Input,
}

impl PidController {
    pub fn new(model: ModelParams, gains: PidGains) -> Self {
        Self {
            u_prev: Input::hover(&model),
            model,
            gains,
            integral: Vector3::zeros(),
        }
    }
}

impl Controller for PidController {
    fn name(&self) -> &'static str {
        "pid"
    }

    fn control(
        &mut self,
        state: &State,
        reference: &Reference,
        _obstacles: &[ObstacleTrack],
    ) -> Result<(Input, SolveDiagnostics), SolverError> {
        let started = Instant::now();
        let m = &self.model;
        let g = &self.gains;
        let err = reference.state.position - state.position;
        let derr = reference.state.velocity - state.velocity;
        let lim = g.integral_limit;
        self.integral = (self.integral + err * m.dt).map(|v| v.clamp(-lim, lim));

        let mut accel = g.kp.component_mul(&err)
            + g.ki.component_mul(&self.integral)
            + g.kd.component_mul(&derr)
            + m.damping.component_mul(&state.velocity);
        // Horizontal demand limited to what the attitude bounds can deliver.
        let tilt = m.roll_max.min(m.pitch_max);
        let max_lateral = 0.8 * m.gravity * tilt.tan();
        let lateral = accel.xy().norm();
        if lateral > max_lateral {
            let s = max_lateral / lateral;
            accel.x *= s;
            accel.y *= s;
        }
        let az = (accel.z + m.gravity).max(0.1 * m.gravity);
        // Invert a = T (cos r sin p, -sin r, cos r cos p) for the attitude,
        // then size thrust for the attitude actually flown.
        let pitch = accel.x.atan2(az);
        let demand = Vector3::new(accel.x, accel.y, az);
        let roll = (-accel.y / demand.norm()).clamp(-1.0, 1.0).asin();
        let thrust = az / (state.roll.cos() * state.pitch.cos()).max(0.5);

        let clamp_rate = |target: f64, prev: f64, step: f64, bound: f64| {
            (prev + (target - prev).clamp(-step, step)).clamp(-bound, bound)
        };
        let input = Input::new(
            thrust.clamp(m.thrust_min, m.thrust_max),
            clamp_rate(roll / m.roll_gain, self.u_prev.roll_ref, m.roll_rate_max, m.roll_max),
            clamp_rate(
                pitch / m.pitch_gain,
                self.u_prev.pitch_ref,
                m.pitch_rate_max,
                m.pitch_max,
            ),
        );
        self.u_prev = input;
        Ok((
            input,
            SolveDiagnostics {
                status: SolveStatus::Converged,
                cost: 0.0,
                obstacle_residual: 0.0,
                rate_residual: 0.0,
                inner_iterations: 0,
                outer_iterations: 0,
                penalty: 0.0,
                rate_limited: false,
                solve_ms: started.elapsed().as_secs_f64() * 1e3,
            },
        ))
    }
}
