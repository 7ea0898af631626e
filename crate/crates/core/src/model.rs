//! Simplified multirotor model.
//!
//! Translational dynamics are driven by a mass-normalized thrust vector
//! rotated by roll and pitch, with linear drag. Roll and pitch track their
//! references through first-order lags that stand in for a low-level
//! attitude controller. Yaw is not part of the model.

use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Flat length of [`State`].
pub const STATE_DIM: usize = 8;
/// Flat length of [`Input`].
pub const INPUT_DIM: usize = 3;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type InputVector = SVector<f64, INPUT_DIM>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("integration diverged: non-finite state after step")]
    IntegrationDiverged,
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
}

/// Position, world-frame velocity, roll and pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub roll: f64,
    pub pitch: f64,
}

impl State {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            roll: 0.0,
            pitch: 0.0,
        }
    }

    pub fn to_vector(&self) -> StateVector {
        let p = &self.position;
        let v = &self.velocity;
        StateVector::from([p.x, p.y, p.z, v.x, v.y, v.z, self.roll, self.pitch])
    }

    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            position: Vector3::new(x[0], x[1], x[2]),
            velocity: Vector3::new(x[3], x[4], x[5]),
            roll: x[6],
            pitch: x[7],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }
}

/// Mass-normalized thrust plus roll/pitch references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Input {
    pub thrust: f64,
    pub roll_ref: f64,
    pub pitch_ref: f64,
}

impl Input {
    pub fn new(thrust: f64, roll_ref: f64, pitch_ref: f64) -> Self {
        Self {
            thrust,
            roll_ref,
            pitch_ref,
        }
    }

    /// Thrust that exactly cancels gravity at level attitude.
    pub fn hover(params: &ModelParams) -> Self {
        Self::new(params.gravity, 0.0, 0.0)
    }

    pub fn to_vector(&self) -> InputVector {
        InputVector::from([self.thrust, self.roll_ref, self.pitch_ref])
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    /// True when the input lies inside the box bounds of `params`.
    pub fn is_admissible(&self, params: &ModelParams) -> bool {
        self.thrust >= params.thrust_min
            && self.thrust <= params.thrust_max
            && self.roll_ref.abs() <= params.roll_max
            && self.pitch_ref.abs() <= params.pitch_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Linear drag coefficients (1/s) per world axis.
    pub damping: Vector3<f64>,
    pub roll_gain: f64,
    pub pitch_gain: f64,
    /// Attitude time constants in seconds.
    pub roll_time_constant: f64,
    pub pitch_time_constant: f64,
    pub gravity: f64,
    pub thrust_min: f64,
    pub thrust_max: f64,
    pub roll_max: f64,
    pub pitch_max: f64,
    /// Largest admissible change of the roll reference between two steps (rad).
    pub roll_rate_max: f64,
    pub pitch_rate_max: f64,
    /// Integration / control step in seconds.
    pub dt: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            damping: Vector3::new(0.1, 0.1, 0.2),
            roll_gain: 1.0,
            pitch_gain: 1.0,
            roll_time_constant: 0.5,
            pitch_time_constant: 0.5,
            gravity: 9.81,
            thrust_min: 0.0,
            thrust_max: 20.0,
            roll_max: 0.4,
            pitch_max: 0.4,
            roll_rate_max: 0.1,
            pitch_rate_max: 0.1,
            dt: 0.05,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidParams(msg.to_string()));
        let all = [
            self.damping.x,
            self.damping.y,
            self.damping.z,
            self.roll_gain,
            self.pitch_gain,
            self.roll_time_constant,
            self.pitch_time_constant,
            self.gravity,
            self.thrust_min,
            self.thrust_max,
            self.roll_max,
            self.pitch_max,
            self.roll_rate_max,
            self.pitch_rate_max,
            self.dt,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.roll_time_constant <= 0.0 || self.pitch_time_constant <= 0.0 {
            return bad("attitude time constants must be positive");
        }
        if self.dt <= 0.0 {
            return bad("dt must be positive");
        }
        if self.gravity <= 0.0 {
            return bad("gravity must be positive");
        }
        if self.thrust_min < 0.0 || self.thrust_max <= self.thrust_min {
            return bad("thrust bounds must satisfy 0 <= min < max");
        }
        if self.roll_max <= 0.0 || self.pitch_max <= 0.0 {
            return bad("attitude bounds must be positive");
        }
        if self.roll_rate_max <= 0.0 || self.pitch_rate_max <= 0.0 {
            return bad("rate limits must be positive");
        }
        Ok(())
    }
}

/// Full episode pose: the model state plus heading and body rates.
///
/// Body rates are bookkeeping only; nothing in the model consumes them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub state: State,
    /// Heading in (-pi, pi].
    pub heading: f64,
    pub body_rates: Vector3<f64>,
}

impl Pose {
    pub fn new(state: State, heading: f64) -> Self {
        Self {
            state,
            heading: wrap_angle(heading),
            body_rates: Vector3::zeros(),
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.state.position
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// World-frame acceleration produced by thrust `thrust` at the given roll and
/// pitch (gravity excluded): `R(roll, pitch) * [0, 0, thrust]`.
pub fn thrust_world_accel(roll: f64, pitch: f64, thrust: f64) -> Vector3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Vector3::new(thrust * cr * sp, -thrust * sr, thrust * cr * cp)
}

/// Time derivative of the state.
pub fn derivative(x: &State, u: &Input, m: &ModelParams) -> State {
    let accel = thrust_world_accel(x.roll, x.pitch, u.thrust)
        - Vector3::new(0.0, 0.0, m.gravity)
        - m.damping.component_mul(&x.velocity);
    State {
        position: x.velocity,
        velocity: accel,
        roll: (m.roll_gain * u.roll_ref - x.roll) / m.roll_time_constant,
        pitch: (m.pitch_gain * u.pitch_ref - x.pitch) / m.pitch_time_constant,
    }
}

pub(crate) fn derivative_vec(x: &StateVector, u: &InputVector, m: &ModelParams) -> StateVector {
    let (sr, cr) = x[6].sin_cos();
    let (sp, cp) = x[7].sin_cos();
    let t = u[0];
    let mut d = StateVector::zeros();
    d[0] = x[3];
    d[1] = x[4];
    d[2] = x[5];
    d[3] = t * cr * sp - m.damping.x * x[3];
    d[4] = -t * sr - m.damping.y * x[4];
    d[5] = t * cr * cp - m.gravity - m.damping.z * x[5];
    d[6] = (m.roll_gain * u[1] - x[6]) / m.roll_time_constant;
    d[7] = (m.pitch_gain * u[2] - x[7]) / m.pitch_time_constant;
    d
}

/// Vector-Jacobian product of [`derivative_vec`]: returns `(J_x^T b, J_u^T b)`.
pub(crate) fn derivative_vjp(
    x: &StateVector,
    u: &InputVector,
    b: &StateVector,
    m: &ModelParams,
) -> (StateVector, InputVector) {
    let (sr, cr) = x[6].sin_cos();
    let (sp, cp) = x[7].sin_cos();
    let t = u[0];
    let (bvx, bvy, bvz) = (b[3], b[4], b[5]);

    let mut gx = StateVector::zeros();
    // d(p)/dt = v
    gx[3] = b[0] - m.damping.x * bvx;
    gx[4] = b[1] - m.damping.y * bvy;
    gx[5] = b[2] - m.damping.z * bvz;
    // thrust direction w.r.t. roll and pitch
    gx[6] = bvx * (-t * sr * sp) + bvy * (-t * cr) + bvz * (-t * sr * cp) - b[6] / m.roll_time_constant;
    gx[7] = bvx * (t * cr * cp) + bvz * (-t * cr * sp) - b[7] / m.pitch_time_constant;

    let gu = InputVector::from([
        bvx * cr * sp - bvy * sr + bvz * cr * cp,
        b[6] * m.roll_gain / m.roll_time_constant,
        b[7] * m.pitch_gain / m.pitch_time_constant,
    ]);
    (gx, gu)
}

pub(crate) fn rk4_vec(x: &StateVector, u: &InputVector, m: &ModelParams) -> StateVector {
    let h = m.dt;
    let k1 = derivative_vec(x, u, m);
    let k2 = derivative_vec(&(x + k1 * (0.5 * h)), u, m);
    let k3 = derivative_vec(&(x + k2 * (0.5 * h)), u, m);
    let k4 = derivative_vec(&(x + k3 * h), u, m);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Reverse-mode sweep through one RK4 step.
///
/// Given the adjoint `lambda` of the step output, returns the adjoint of the
/// step input state and the gradient contribution for the held input.
pub(crate) fn rk4_vjp(
    x: &StateVector,
    u: &InputVector,
    lambda: &StateVector,
    m: &ModelParams,
) -> (StateVector, InputVector) {
    let h = m.dt;
    let k1 = derivative_vec(x, u, m);
    let x2 = x + k1 * (0.5 * h);
    let k2 = derivative_vec(&x2, u, m);
    let x3 = x + k2 * (0.5 * h);
    let k3 = derivative_vec(&x3, u, m);
    let x4 = x + k3 * h;

    let mut gx = *lambda;
    let mut gu = InputVector::zeros();
    let b4 = lambda * (h / 6.0);
    let mut b3 = lambda * (h / 3.0);
    let mut b2 = lambda * (h / 3.0);
    let mut b1 = lambda * (h / 6.0);

    let (ax, au) = derivative_vjp(&x4, u, &b4, m);
    gx += ax;
    gu += au;
    b3 += ax * h;

    let (ax, au) = derivative_vjp(&x3, u, &b3, m);
    gx += ax;
    gu += au;
    b2 += ax * (0.5 * h);

    let (ax, au) = derivative_vjp(&x2, u, &b2, m);
    gx += ax;
    gu += au;
    b1 += ax * (0.5 * h);

    let (ax, au) = derivative_vjp(x, u, &b1, m);
    gx += ax;
    gu += au;
    (gx, gu)
}

/// One classical Runge-Kutta step with the input held over `m.dt`.
pub fn step_rk4(x: &State, u: &Input, m: &ModelParams) -> Result<State, ModelError> {
    let next = rk4_vec(&x.to_vector(), &u.to_vector(), m);
    if next.iter().all(|c| c.is_finite()) {
        Ok(State::from_vector(&next))
    } else {
        Err(ModelError::IntegrationDiverged)
    }
}

/// Integrates `inputs` from `x0`, returning `inputs.len() + 1` states.
pub fn rollout(x0: &State, inputs: &[Input], m: &ModelParams) -> Result<Vec<State>, ModelError> {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(*x0);
    let mut x = *x0;
    for u in inputs {
        x = step_rk4(&x, u, m)?;
        states.push(x);
    }
    Ok(states)
}
