//! Single-shooting optimal control problem over a fixed horizon.
//!
//! Decision variables are the `N` input triples `[T, roll_ref, pitch_ref]`
//! laid out flat; states are recovered by RK4 rollout. The objective is the
//! tracking cost plus quadratic penalties for the obstacle spheres and the
//! input-rate limits, both scaled by the penalty weight `mu`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    rk4_vec, rk4_vjp, Input, InputVector, ModelError, ModelParams, State, StateVector, INPUT_DIM, STATE_DIM,
};
use crate::obstacle::{h_sphere, ObstacleSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OcpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid weights: {0}")]
    Weights(String),
}

/// Diagonal weights for state tracking, input tracking and input rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    /// Order: x, y, z, vx, vy, vz, roll, pitch.
    pub state: [f64; STATE_DIM],
    /// Order: thrust, roll_ref, pitch_ref.
    pub input: [f64; INPUT_DIM],
    pub rate: [f64; INPUT_DIM],
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            state: [5.0, 5.0, 8.0, 1.0, 1.0, 1.0, 2.0, 2.0],
            input: [1.0, 5.0, 5.0],
            rate: [2.0, 10.0, 10.0],
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), OcpError> {
        let ok = self
            .state
            .iter()
            .chain(&self.input)
            .chain(&self.rate)
            .all(|w| w.is_finite() && *w >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(OcpError::Weights("weights must be finite and non-negative".into()))
        }
    }
}

/// Run-time parameters of one horizon solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub x0: State,
    pub x_ref: State,
    pub u_ref: Input,
    /// Input applied at the previous control step.
    pub u_prev: Input,
    pub obstacles: Vec<ObstacleSpec>,
    /// Quadratic penalty weight.
    pub mu: f64,
}

/// Worst constraint violation over the controllable part of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintResiduals {
    /// Largest `h_sphere` over steps `1..=N` and all obstacles.
    pub obstacle: f64,
    /// Largest excess `|delta ref| - limit` over the roll/pitch references, in rad.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonProblem {
    horizon: usize,
    model: ModelParams,
    weights: CostWeights,
    params: ParamVector,
}

impl HorizonProblem {
    pub fn new(
        horizon: usize,
        model: ModelParams,
        weights: CostWeights,
        params: ParamVector,
    ) -> Result<Self, OcpError> {
        if horizon == 0 {
            return Err(OcpError::Dimension("horizon must be at least 1".into()));
        }
        weights.validate()?;
        for (i, o) in params.obstacles.iter().enumerate() {
            if o.centers.len() != horizon + 1 {
                return Err(OcpError::Dimension(format!(
                    "obstacle {i} has {} centers, expected {}",
                    o.centers.len(),
                    horizon + 1
                )));
            }
        }
        if !(params.mu >= 0.0) {
            return Err(OcpError::Dimension("penalty weight must be non-negative".into()));
        }
        Ok(Self {
            horizon,
            model,
            weights,
            params,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn weights(&self) -> &CostWeights {
        &self.weights
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn mu(&self) -> f64 {
        self.params.mu
    }

    /// Same problem with a different penalty weight.
    pub fn with_mu(&self, mu: f64) -> Self {
        let mut p = self.clone();
        p.params.mu = mu;
        p
    }

    /// Length of the flat decision vector, `3N`.
    pub fn dim(&self) -> usize {
        INPUT_DIM * self.horizon
    }

    pub fn pack(inputs: &[Input]) -> Vec<f64> {
        inputs
            .iter()
            .flat_map(|u| [u.thrust, u.roll_ref, u.pitch_ref])
            .collect()
    }

    pub fn unpack(z: &[f64]) -> Vec<Input> {
        z.chunks_exact(INPUT_DIM).map(Input::from_slice).collect()
    }

    /// Hover input repeated over the horizon.
    pub fn hover_guess(&self) -> Vec<f64> {
        Self::pack(&vec![Input::hover(&self.model); self.horizon])
    }

    fn check_len(&self, z: &[f64]) -> Result<(), OcpError> {
        if z.len() == self.dim() {
            Ok(())
        } else {
            Err(OcpError::Dimension(format!(
                "decision vector has length {}, expected {}",
                z.len(),
                self.dim()
            )))
        }
    }

    fn input_at(z: &[f64], j: usize) -> InputVector {
        InputVector::from_column_slice(&z[INPUT_DIM * j..INPUT_DIM * (j + 1)])
    }

    fn rollout_vec(&self, z: &[f64]) -> Result<Vec<StateVector>, OcpError> {
        let mut xs = Vec::with_capacity(self.horizon + 1);
        let mut x = self.params.x0.to_vector();
        xs.push(x);
        for j in 0..self.horizon {
            x = rk4_vec(&x, &Self::input_at(z, j), &self.model);
            if !x.iter().all(|c| c.is_finite()) {
                return Err(ModelError::IntegrationDiverged.into());
            }
            xs.push(x);
        }
        Ok(xs)
    }

    /// Predicted states `x_0..x_N` for decision vector `z`.
    pub fn predicted_states(&self, z: &[f64]) -> Result<Vec<State>, OcpError> {
        self.check_len(z)?;
        Ok(self.rollout_vec(z)?.iter().map(State::from_vector).collect())
    }

    fn tracking_cost(&self, z: &[f64], xs: &[StateVector]) -> f64 {
        let w = &self.weights;
        let x_ref = self.params.x_ref.to_vector();
        let u_ref = self.params.u_ref.to_vector();
        let quad = |d: &[f64], q: &[f64]| d.iter().zip(q).map(|(a, b)| a * a * b).sum::<f64>();

        let mut cost = 0.0;
        for x in xs {
            cost += quad((x_ref - x).as_slice(), &w.state);
        }
        let mut prev = self.params.u_prev.to_vector();
        for j in 0..self.horizon {
            let u = Self::input_at(z, j);
            cost += quad((u_ref - u).as_slice(), &w.input);
            cost += quad((u - prev).as_slice(), &w.rate);
            prev = u;
        }
        // Terminal input term: u_N is taken equal to u_{N-1}, so only the
        // input-tracking part survives.
        cost += quad((u_ref - prev).as_slice(), &w.input);
        cost
    }

    fn obstacle_penalty(&self, xs: &[StateVector]) -> f64 {
        let mut sum = 0.0;
        for (k, x) in xs.iter().enumerate() {
            let p = Vector3::new(x[0], x[1], x[2]);
            for o in &self.params.obstacles {
                let h = h_sphere(&p, o, k);
                sum += h * h;
            }
        }
        self.params.mu * sum
    }

    /// Tracking cost: states, inputs and input smoothness.
    pub fn eval_cost(&self, z: &[f64]) -> Result<f64, OcpError> {
        self.check_len(z)?;
        let xs = self.rollout_vec(z)?;
        Ok(self.tracking_cost(z, &xs))
    }

    /// `mu * sum h_sphere^2` over all horizon states and obstacles.
    pub fn eval_penalty(&self, z: &[f64]) -> Result<f64, OcpError> {
        self.check_len(z)?;
        let xs = self.rollout_vec(z)?;
        Ok(self.obstacle_penalty(&xs))
    }

    /// Unweighted squared rate-limit excess of the roll/pitch references.
    pub fn eval_rate_violation(&self, z: &[f64]) -> Result<f64, OcpError> {
        self.check_len(z)?;
        let limits = [self.model.roll_rate_max, self.model.pitch_rate_max];
        let mut prev = self.params.u_prev.to_vector();
        let mut sum = 0.0;
        for j in 0..self.horizon {
            let u = Self::input_at(z, j);
            for (c, lim) in [1, 2].into_iter().zip(limits) {
                let e = ((u[c] - prev[c]).abs() - lim).max(0.0);
                sum += e * e;
            }
            prev = u;
        }
        Ok(sum)
    }

    /// Penalized objective: cost + penalty + `mu` * rate violation.
    pub fn eval_objective(&self, z: &[f64]) -> Result<f64, OcpError> {
        self.check_len(z)?;
        let xs = self.rollout_vec(z)?;
        Ok(self.tracking_cost(z, &xs) + self.obstacle_penalty(&xs) + self.params.mu * self.eval_rate_violation(z)?)
    }

    /// Exact gradient of [`Self::eval_objective`].
    pub fn eval_gradient(&self, z: &[f64]) -> Result<Vec<f64>, OcpError> {
        let mut g = vec![0.0; z.len()];
        self.value_and_gradient(z, &mut g)?;
        Ok(g)
    }

    /// Objective value and its gradient via a reverse sweep through the rollout.
    pub fn value_and_gradient(&self, z: &[f64], grad: &mut [f64]) -> Result<f64, OcpError> {
        self.check_len(z)?;
        if grad.len() != z.len() {
            return Err(OcpError::Dimension("gradient buffer length".into()));
        }
        let n = self.horizon;
        let m = &self.model;
        let w = &self.weights;
        let mu = self.params.mu;
        let xs = self.rollout_vec(z)?;
        let x_ref = self.params.x_ref.to_vector();
        let u_ref = self.params.u_ref.to_vector();
        let u_prev = self.params.u_prev.to_vector();
        let qx = StateVector::from(w.state);
        let qu = InputVector::from(w.input);
        let qd = InputVector::from(w.rate);

        let mut value = self.tracking_cost(z, &xs) + self.obstacle_penalty(&xs);

        // Direct input terms.
        grad.fill(0.0);
        let limits = [0.0, m.roll_rate_max, m.pitch_rate_max];
        let mut prev = u_prev;
        for j in 0..n {
            let u = Self::input_at(z, j);
            let mut g = (u - u_ref).component_mul(&qu) * 2.0;
            if j + 1 == n {
                g *= 2.0;
            }
            let d = (u - prev).component_mul(&qd) * 2.0;
            g += d;
            for c in 1..INPUT_DIM {
                let delta = u[c] - prev[c];
                let e = (delta.abs() - limits[c]).max(0.0);
                if e > 0.0 {
                    value += mu * e * e;
                    let ge = 2.0 * mu * e * delta.signum();
                    g[c] += ge;
                    if j > 0 {
                        grad[INPUT_DIM * (j - 1) + c] -= ge;
                    }
                }
            }
            if j > 0 {
                for c in 0..INPUT_DIM {
                    grad[INPUT_DIM * (j - 1) + c] -= d[c];
                }
            }
            for c in 0..INPUT_DIM {
                grad[INPUT_DIM * j + c] += g[c];
            }
            prev = u;
        }

        // State-dependent terms, swept backwards through the dynamics.
        let state_grad = |k: usize| -> StateVector {
            let x = &xs[k];
            let mut g = (x - x_ref).component_mul(&qx) * 2.0;
            if mu > 0.0 {
                let p = Vector3::new(x[0], x[1], x[2]);
                for o in &self.params.obstacles {
                    let h = h_sphere(&p, o, k);
                    if h > 0.0 {
                        let gp = (p - o.centers[k]) * (-4.0 * mu * h);
                        g[0] += gp.x;
                        g[1] += gp.y;
                        g[2] += gp.z;
                    }
                }
            }
            g
        };
        let mut lambda = state_grad(n);
        for j in (0..n).rev() {
            let u = Self::input_at(z, j);
            let (gx, gu) = rk4_vjp(&xs[j], &u, &lambda, m);
            for c in 0..INPUT_DIM {
                grad[INPUT_DIM * j + c] += gu[c];
            }
            if j > 0 {
                lambda = gx + state_grad(j);
            }
        }
        Ok(value)
    }

    /// Residuals used by the penalty loop to decide whether to escalate `mu`.
    pub fn residuals(&self, z: &[f64]) -> Result<ConstraintResiduals, OcpError> {
        self.check_len(z)?;
        let xs = self.rollout_vec(z)?;
        let mut obstacle: f64 = 0.0;
        for (k, x) in xs.iter().enumerate().skip(1) {
            let p = Vector3::new(x[0], x[1], x[2]);
            for o in &self.params.obstacles {
                obstacle = obstacle.max(h_sphere(&p, o, k));
            }
        }
        let inputs = Self::unpack(z);
        let rate = max_rate_excess(&self.params.u_prev, &inputs, &self.model);
        Ok(ConstraintResiduals { obstacle, rate })
    }
}

/// Largest amount by which consecutive roll/pitch references exceed their
/// per-step limits, starting from `prev`.
pub fn max_rate_excess(prev: &Input, inputs: &[Input], m: &ModelParams) -> f64 {
    let mut worst: f64 = 0.0;
    let mut last = *prev;
    for u in inputs {
        worst = worst
            .max((u.roll_ref - last.roll_ref).abs() - m.roll_rate_max)
            .max((u.pitch_ref - last.pitch_ref).abs() - m.pitch_rate_max);
        last = *u;
    }
    worst.max(0.0)
}
