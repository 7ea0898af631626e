//! Scenario files: one JSON document describing an episode.

use std::path::Path;
use std::time::Duration;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::{ModelParams, Pose, State};
use crate::navigator::{Landmark, MemoryGraph, NavigatorConfig, ProcessReasoner, Reasoner, RuleReasoner};
use crate::obstacle::{ObstacleTrack, TimedPoint};
use crate::ocp::CostWeights;
use crate::panoc::SolverConfig;
use crate::sim::controller::PidGains;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    #[default]
    Nmpc,
    Pid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialPose {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub roll: f64,
    pub pitch: f64,
    pub heading: f64,
    pub body_rates: Vector3<f64>,
}

impl Default for InitialPose {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            roll: 0.0,
            pitch: 0.0,
            heading: 0.0,
            body_rates: Vector3::zeros(),
        }
    }
}

impl InitialPose {
    pub fn pose(&self) -> Pose {
        let mut pose = Pose::new(
            State {
                position: self.position,
                velocity: self.velocity,
                roll: self.roll,
                pitch: self.pitch,
            },
            self.heading,
        );
        pose.body_rates = self.body_rates;
        pose
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub radius: f64,
    #[serde(default)]
    pub safety_radius: f64,
    pub script: Vec<TimedPoint>,
}

impl ObstacleConfig {
    pub fn track(&self) -> Result<ObstacleTrack, SimError> {
        ObstacleTrack::new(self.radius, self.safety_radius, self.script.clone()).map_err(SimError::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub landmark: String,
    #[serde(default = "default_goal_radius")]
    pub radius: f64,
}

fn default_goal_radius() -> f64 {
    5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeLimits {
    /// Simulated seconds before the episode is cut off.
    pub max_time: f64,
    /// A macro-action is done once the position error (inf-norm, m) ...
    pub settle_tolerance: f64,
    /// ... and the speed (m/s) drop below these.
    pub settle_speed: f64,
    /// Seconds after which the navigator moves on regardless.
    pub settle_timeout: f64,
    /// Heading slew rate for turns (rad/s).
    pub yaw_rate: f64,
    /// The position setpoint moves toward each macro-action target at this
    /// speed (m/s); 0 applies the target as a step.
    pub reference_speed: f64,
    pub halt_on_collision: bool,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        Self {
            max_time: 60.0,
            settle_tolerance: 0.02,
            settle_speed: 0.05,
            settle_timeout: 20.0,
            yaw_rate: 1.5,
            reference_speed: 0.0,
            halt_on_collision: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReasonerConfig {
    #[default]
    Rules,
    /// External program speaking newline-delimited JSON.
    Process {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
    },
}

fn default_timeout() -> f64 {
    ProcessReasoner::DEFAULT_TIMEOUT.as_secs_f64()
}

impl ReasonerConfig {
    pub fn build(&self) -> Result<Box<dyn Reasoner>, SimError> {
        Ok(match self {
            Self::Rules => Box::new(RuleReasoner),
            Self::Process {
                program,
                args,
                timeout_s,
            } => Box::new(
                ProcessReasoner::spawn(program, args, Duration::from_secs_f64(*timeout_s))
                    .map_err(|e| SimError::Scenario(format!("reasoner {program:?}: {e}")))?,
            ),
        })
    }
}

fn default_horizon() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub controller: ControllerKind,
    #[serde(default)]
    pub pid: PidGains,
    #[serde(default)]
    pub initial_pose: InitialPose,
    #[serde(default)]
    pub landmarks: Vec<Landmark>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleConfig>,
    pub instruction: String,
    pub goal: GoalSpec,
    #[serde(default)]
    pub limits: EpisodeLimits,
    #[serde(default)]
    pub navigator: NavigatorConfig,
    /// Pre-seeded trackback memory.
    #[serde(default)]
    pub memory: Option<MemoryGraph>,
    #[serde(default)]
    pub reasoner: ReasonerConfig,
    #[serde(default)]
    pub seed: u64,
    /// Plant parameters are perturbed by up to this many percent (seeded).
    #[serde(default)]
    pub mismatch_percent: f64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Self = serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            SimError::Scenario(msg) => SimError::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn goal_landmark(&self) -> Option<&Landmark> {
        self.landmarks.iter().find(|l| l.name == self.goal.landmark)
    }

    /// Straight-line distance from the start to the goal center.
    pub fn reference_length(&self) -> f64 {
        self.goal_landmark()
            .map(|g| (g.position - self.initial_pose.position).norm())
            .unwrap_or(f64::NAN)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Scenario(m));
        if self.goal_landmark().is_none() {
            return bad(format!(
                "goal landmark {:?} is not among the landmarks",
                self.goal.landmark
            ));
        }
        if !(self.goal.radius > 0.0) {
            return bad("goal radius must be positive".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        self.model.validate().map_err(|e| SimError::Scenario(e.to_string()))?;
        self.solver.validate().map_err(SimError::Scenario)?;
        self.weights.validate().map_err(|e| SimError::Scenario(e.to_string()))?;
        for (i, o) in self.obstacles.iter().enumerate() {
            o.track()
                .map_err(|e| SimError::Scenario(format!("obstacle {i}: {e}")))?;
        }
        let l = &self.limits;
        if !(l.max_time > 0.0
            && l.settle_timeout > 0.0
            && l.yaw_rate > 0.0
            && l.settle_tolerance > 0.0
            && l.reference_speed >= 0.0)
        {
            return bad("episode limits must be positive".into());
        }
        if !(0.0..100.0).contains(&self.mismatch_percent) {
            return bad("mismatch_percent must be in [0, 100)".into());
        }
        if self
            .landmarks
            .iter()
            .any(|l| !l.position.iter().all(|v| v.is_finite()) || l.radius < 0.0)
        {
            return bad("landmarks need finite positions and non-negative radii".into());
        }
        Ok(())
    }
}
