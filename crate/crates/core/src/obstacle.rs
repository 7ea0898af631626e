//! Spherical obstacles: scripted ground-truth motion, trajectory
//! prediction, and the inflated-sphere constraint.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObstacleError {
    #[error("obstacle script needs at least one waypoint")]
    EmptyScript,
    #[error("obstacle script timestamps must be strictly increasing (at index {0})")]
    NonIncreasingTime(usize),
    #[error("obstacle radius must be positive and safety radius non-negative")]
    BadRadius,
    #[error("obstacle values must be finite")]
    NonFinite,
}

/// Predicted obstacle geometry over a horizon: one center per step `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSpec {
    pub radius: f64,
    pub safety_radius: f64,
    pub centers: Vec<Vector3<f64>>,
}

impl ObstacleSpec {
    pub fn inflated_radius(&self) -> f64 {
        self.radius + self.safety_radius
    }

    /// Number of horizon steps covered (`centers.len() - 1`).
    pub fn horizon(&self) -> usize {
        self.centers.len().saturating_sub(1)
    }
}

/// `max(0, (r_obs + r_s)^2 - |p - c_k|^2)`; positive exactly inside the
/// inflated sphere at step `k`.
pub fn h_sphere(p: &Vector3<f64>, spec: &ObstacleSpec, k: usize) -> f64 {
    let r = spec.inflated_radius();
    (r * r - (p - spec.centers[k]).norm_squared()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedPoint {
    pub t: f64,
    pub position: Vector3<f64>,
}

/// Ground-truth motion script plus the latest perceived position/velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleTrack {
    pub radius: f64,
    pub safety_radius: f64,
    script: Vec<TimedPoint>,
    pub measured_position: Vector3<f64>,
    pub measured_velocity: Vector3<f64>,
}

impl ObstacleTrack {
    pub fn new(radius: f64, safety_radius: f64, script: Vec<TimedPoint>) -> Result<Self, ObstacleError> {
        if script.is_empty() {
            return Err(ObstacleError::EmptyScript);
        }
        if !(radius > 0.0) || !(safety_radius >= 0.0) {
            return Err(ObstacleError::BadRadius);
        }
        if !radius.is_finite()
            || !safety_radius.is_finite()
            || script
                .iter()
                .any(|w| !w.t.is_finite() || w.position.iter().any(|c| !c.is_finite()))
        {
            return Err(ObstacleError::NonFinite);
        }
        if let Some(i) = script.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(ObstacleError::NonIncreasingTime(i + 1));
        }
        let start = script[0].position;
        Ok(Self {
            radius,
            safety_radius,
            script,
            measured_position: start,
            measured_velocity: Vector3::zeros(),
        })
    }

    pub fn script(&self) -> &[TimedPoint] {
        &self.script
    }

    /// Ground-truth center at time `t`, clamped to the script span.
    pub fn advance_truth(&self, t: f64) -> Vector3<f64> {
        let s = &self.script;
        if t <= s[0].t {
            return s[0].position;
        }
        let last = s[s.len() - 1];
        if t >= last.t {
            return last.position;
        }
        let i = s.partition_point(|w| w.t <= t);
        let (a, b) = (s[i - 1], s[i]);
        if t == a.t {
            return a.position;
        }
        let alpha = (t - a.t) / (b.t - a.t);
        a.position + (b.position - a.position) * alpha
    }

    /// Updates the perceived state from two truth samples `dt` apart ending at `t`.
    pub fn measure(&mut self, t: f64, dt: f64) {
        let now = self.advance_truth(t);
        let before = self.advance_truth(t - dt);
        self.measured_position = now;
        self.measured_velocity = (now - before) / dt;
    }
}

/// Turns a track into a predicted [`ObstacleSpec`] over `n` steps.
///
/// Other motion models can be slotted in behind this trait.
pub trait TrajectoryPredictor {
    fn predict(&self, track: &ObstacleTrack, dt: f64, n: usize) -> ObstacleSpec;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl TrajectoryPredictor for ConstantVelocity {
    fn predict(&self, track: &ObstacleTrack, dt: f64, n: usize) -> ObstacleSpec {
        predict_constant_velocity(track, dt, n)
    }
}

pub fn predict_constant_velocity(track: &ObstacleTrack, dt: f64, n: usize) -> ObstacleSpec {
    let centers = (0..=n)
        .map(|k| track.measured_position + track.measured_velocity * (k as f64 * dt))
        .collect();
    ObstacleSpec {
        radius: track.radius,
        safety_radius: track.safety_radius,
        centers,
    }
}
