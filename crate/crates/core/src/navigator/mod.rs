//! Language-driven navigation on top of the controller: sub-goals from the
//! instruction, nine-sector view descriptors, a trackback memory graph and a
//! deterministic policy that emits macro-actions.

pub mod hsd;
pub mod instruction;
pub mod memory;

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{wrap_angle, ModelParams, Pose};
use crate::sim::controller::Reference;

pub use hsd::{describe_view, hsd_verbalize, sector_of, Landmark, SectorDescriptor};
pub use instruction::{
    extract_subgoals, Directive, Instruction, ProcessReasoner, Qualifier, Reasoner, ReasonerError, RuleReasoner,
    SubGoal, SubGoalList,
};
pub use memory::{MemoryEdge, MemoryError, MemoryGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("action budget of {0} exhausted")]
    BudgetExhausted(usize),
    #[error("invalid macro-action {0}: magnitude must be positive and finite")]
    InvalidAction(MacroAction),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MacroAction {
    /// Meters along the heading.
    MoveForward(f64),
    /// Radians, counter-clockwise seen from above.
    TurnLeft(f64),
    TurnRight(f64),
    Ascend(f64),
    Descend(f64),
    /// Meters sideways without changing heading.
    MoveLeft(f64),
    MoveRight(f64),
    Stop,
}

impl MacroAction {
    pub fn magnitude(&self) -> Option<f64> {
        use MacroAction::*;
        match *self {
            MoveForward(v) | TurnLeft(v) | TurnRight(v) | Ascend(v) | Descend(v) | MoveLeft(v) | MoveRight(v) => {
                Some(v)
            }
            Stop => None,
        }
    }

    pub fn validate(&self) -> Result<(), NavError> {
        match self.magnitude() {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(NavError::InvalidAction(*self)),
            _ => Ok(()),
        }
    }

    pub fn is_turn(&self) -> bool {
        matches!(self, MacroAction::TurnLeft(_) | MacroAction::TurnRight(_))
    }
}

impl fmt::Display for MacroAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use MacroAction::*;
        match *self {
            MoveForward(d) => write!(f, "MOVE_FORWARD({d:.2})"),
            TurnLeft(a) => write!(f, "TURN_LEFT({:.1}deg)", a.to_degrees()),
            TurnRight(a) => write!(f, "TURN_RIGHT({:.1}deg)", a.to_degrees()),
            Ascend(d) => write!(f, "ASCEND({d:.2})"),
            Descend(d) => write!(f, "DESCEND({d:.2})"),
            MoveLeft(d) => write!(f, "MOVE_LEFT({d:.2})"),
            MoveRight(d) => write!(f, "MOVE_RIGHT({d:.2})"),
            Stop => write!(f, "STOP"),
        }
    }
}

/// What a macro-action means for the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    /// New setpoint, or `None` to keep the current one (turns, stop).
    pub reference: Option<Reference>,
    pub heading: f64,
    pub stop: bool,
}

pub fn resolve_macro_action(pose: &Pose, action: &MacroAction, model: &ModelParams) -> Resolution {
    let (s, c) = pose.heading.sin_cos();
    let forward = Vector3::new(c, s, 0.0);
    let left = Vector3::new(-s, c, 0.0);
    let offset = match *action {
        MacroAction::MoveForward(d) => Some(forward * d),
        MacroAction::MoveLeft(d) => Some(left * d),
        MacroAction::MoveRight(d) => Some(-left * d),
        MacroAction::Ascend(d) => Some(Vector3::z() * d),
        MacroAction::Descend(d) => Some(-Vector3::z() * d),
        _ => None,
    };
    let heading = match *action {
        MacroAction::TurnLeft(a) => wrap_angle(pose.heading + a),
        MacroAction::TurnRight(a) => wrap_angle(pose.heading - a),
        _ => pose.heading,
    };
    Resolution {
        reference: offset.map(|o| Reference::hover_at(pose.position() + o, model)),
        heading,
        stop: matches!(action, MacroAction::Stop),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavigatorConfig {
    pub fov_deg: f64,
    /// Landmarks further away than this are not seen (m).
    pub visibility_range: f64,
    pub goal_radius: f64,
    pub max_actions: usize,
    /// Longest single forward move (m).
    pub max_forward: f64,
    /// Distance used for literal "move"/"go straight" words (m).
    pub directive_step: f64,
    pub vertical_step: f64,
    /// In-place turns spent looking around before asking for help.
    pub scan_turns: usize,
    pub explore_step: f64,
    /// Bearing below which the policy stops turning toward a remembered node (rad).
    pub heading_tolerance: f64,
    pub memory: bool,
}

impl Default for NavigatorConfig {
    fn default() -> Self {
        Self {
            fov_deg: 90.0,
            visibility_range: 100.0,
            goal_radius: 5.0,
            max_actions: 100,
            max_forward: 20.0,
            directive_step: 10.0,
            vertical_step: 5.0,
            scan_turns: 4,
            explore_step: 10.0,
            heading_tolerance: 0.05,
            memory: true,
        }
    }
}

impl NavigatorConfig {
    pub fn fov(&self) -> f64 {
        self.fov_deg.to_radians()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum NavEvent {
    ReasonerFailure { message: String },
    SubgoalReached { landmark: String },
    MemoryReplay { fragment: String, to: String },
    Clarification { prompt: String },
}

/// Episode-scoped navigation state: plan cursor, memory, action count.
pub struct Navigator {
    config: NavigatorConfig,
    reasoner: Box<dyn Reasoner>,
    instruction: Option<Instruction>,
    plan: SubGoalList,
    cursor: usize,
    directive_cursor: usize,
    goal: String,
    memory: MemoryGraph,
    actions: usize,
    scans: usize,
    clarified: bool,
    leg_length: f64,
    last_position: Option<Vector3<f64>>,
    events: Vec<NavEvent>,
}

fn matches_name(phrase: &str, name: &str) -> bool {
    let (p, n) = (phrase.trim().to_lowercase(), name.trim().to_lowercase());
    !p.is_empty() && (p == n || n.contains(&p) || p.contains(&n))
}

impl Navigator {
    /// Reads the instruction through `reasoner`. A reasoner failure leaves an
    /// empty plan (the goal landmark is still pursued) and logs an event.
    pub fn new(
        config: NavigatorConfig,
        mut reasoner: Box<dyn Reasoner>,
        instruction: &str,
        goal: &str,
        memory: MemoryGraph,
    ) -> Self {
        let mut events = Vec::new();
        let (instruction, plan) = match Instruction::parse(instruction) {
            Ok(instr) => {
                let (plan, diag) = extract_subgoals(&instr, reasoner.as_mut(), goal);
                if let Some(message) = diag {
                    events.push(NavEvent::ReasonerFailure { message });
                }
                (Some(instr), plan)
            }
            Err(e) => {
                events.push(NavEvent::ReasonerFailure { message: e.to_string() });
                (None, SubGoalList::default())
            }
        };
        Self {
            config,
            reasoner,
            instruction,
            plan,
            cursor: 0,
            directive_cursor: 0,
            goal: goal.to_string(),
            memory,
            actions: 0,
            scans: 0,
            clarified: false,
            leg_length: 0.0,
            last_position: None,
            events,
        }
    }

    pub fn config(&self) -> &NavigatorConfig {
        &self.config
    }

    pub fn plan(&self) -> &SubGoalList {
        &self.plan
    }

    pub fn memory(&self) -> &MemoryGraph {
        &self.memory
    }

    pub fn events(&self) -> &[NavEvent] {
        &self.events
    }

    pub fn actions_taken(&self) -> usize {
        self.actions
    }

    /// Current target phrase: the next sub-goal, else the episode goal.
    pub fn target(&self) -> &str {
        self.plan
            .goals
            .get(self.cursor)
            .map(|g| g.phrase.as_str())
            .unwrap_or(&self.goal)
    }

    fn observe(&mut self, pose: &Pose) {
        let p = pose.position();
        if let Some(last) = self.last_position {
            self.leg_length += (p - last).norm();
        }
        self.last_position = Some(p);
    }

    fn arrive(&mut self, name: &str, position: Vector3<f64>, fragment: &str) {
        if self.config.memory {
            if let Some(from) = self.memory.current.clone() {
                if from != name && self.leg_length > 0.0 {
                    // Errors here are only self-loops/zero cost, both excluded above.
                    let _ = self.memory.record(&from, name, fragment, self.leg_length);
                }
            }
        }
        self.memory.upsert_node(name, Some(position));
        self.memory.current = Some(name.to_string());
        self.leg_length = 0.0;
    }

    /// Picks the next macro-action. Deterministic in (pose, landmarks, state).
    pub fn decide_next(&mut self, pose: &Pose, landmarks: &[Landmark]) -> Result<MacroAction, NavError> {
        if self.actions >= self.config.max_actions {
            return Err(NavError::BudgetExhausted(self.config.max_actions));
        }
        self.observe(pose);
        let action = self.policy(pose, landmarks);
        action.validate()?;
        self.actions += 1;
        Ok(action)
    }

    fn fragment(&self) -> String {
        self.instruction.as_ref().map(|i| i.text.clone()).unwrap_or_default()
    }

    fn policy(&mut self, pose: &Pose, landmarks: &[Landmark]) -> MacroAction {
        let radius = self.config.goal_radius;
        let near = |name: &str| {
            landmarks
                .iter()
                .filter(|l| matches_name(name, &l.name))
                .filter(|l| (l.position - pose.position()).norm() <= radius)
                .min_by(|a, b| {
                    let da = (a.position - pose.position()).norm();
                    let db = (b.position - pose.position()).norm();
                    da.total_cmp(&db).then_with(|| a.name.cmp(&b.name))
                })
                .cloned()
        };

        // Sub-goals reached on the way are ticked off and remembered.
        while self.cursor < self.plan.goals.len() {
            let phrase = self.plan.goals[self.cursor].phrase.clone();
            match near(&phrase) {
                Some(lm) => {
                    self.arrive(&lm.name, lm.position, &phrase);
                    self.events.push(NavEvent::SubgoalReached { landmark: lm.name });
                    self.cursor += 1;
                    self.scans = 0;
                }
                None => break,
            }
        }
        if self.cursor == self.plan.goals.len() {
            if let Some(lm) = near(&self.goal) {
                let fragment = self.fragment();
                self.arrive(&lm.name, lm.position, &fragment);
                return MacroAction::Stop;
            }
            if self.plan.stop && self.plan.goals.is_empty() && self.plan.directives.is_empty() {
                return MacroAction::Stop;
            }
        }

        loop {
            let target = self.target().to_string();

            // 1. Target in view: center it, then fly at it.
            let view = describe_view(pose, landmarks, self.config.fov(), self.config.visibility_range);
            let seen = view
                .iter()
                .filter(|d| matches_name(&target, &d.landmark))
                .min_by(|a, b| {
                    let ca = (a.x_hat - 0.5).hypot(a.y_hat - 0.5);
                    let cb = (b.x_hat - 0.5).hypot(b.y_hat - 0.5);
                    ca.total_cmp(&cb)
                        .then(a.range.total_cmp(&b.range))
                        .then_with(|| a.landmark.cmp(&b.landmark))
                });
            if let Some(d) = seen {
                self.scans = 0;
                let lm = landmarks
                    .iter()
                    .find(|l| l.name == d.landmark)
                    .expect("descriptor from landmark");
                return self.steer(pose, d, lm.position);
            }

            // 2. Remembered route toward a node matching the target.
            if self.config.memory {
                if let Some(action) = self.replay(pose, &target, landmarks) {
                    return action;
                }
            }

            // 3. Literal directives from the instruction.
            if let Some(&d) = self.plan.directives.get(self.directive_cursor) {
                self.directive_cursor += 1;
                let c = &self.config;
                return match d {
                    Directive::TurnLeft => MacroAction::TurnLeft(std::f64::consts::FRAC_PI_2),
                    Directive::TurnRight => MacroAction::TurnRight(std::f64::consts::FRAC_PI_2),
                    Directive::MoveLeft => MacroAction::MoveLeft(c.directive_step),
                    Directive::MoveRight => MacroAction::MoveRight(c.directive_step),
                    Directive::Forward => MacroAction::MoveForward(c.directive_step),
                    Directive::Ascend => MacroAction::Ascend(c.vertical_step),
                    Directive::Descend => MacroAction::Descend(c.vertical_step),
                };
            }

            // 4. Look around.
            if self.scans < self.config.scan_turns {
                self.scans += 1;
                return MacroAction::TurnLeft(std::f64::consts::FRAC_PI_2);
            }

            // 5. Ask once; adopt whatever comes back.
            if !self.clarified {
                self.clarified = true;
                let prompt = format!("I cannot find the {target}. Which way should I go?");
                self.events.push(NavEvent::Clarification { prompt: prompt.clone() });
                match self.reasoner.clarify(&prompt, &target) {
                    Ok(extra) if !extra.is_empty() => {
                        let at = self.cursor;
                        self.plan.goals.splice(at..at, extra.goals);
                        let at = self.directive_cursor;
                        self.plan.directives.splice(at..at, extra.directives);
                        self.scans = 0;
                        continue;
                    }
                    Ok(_) => {}
                    Err(e) => self.events.push(NavEvent::ReasonerFailure { message: e.to_string() }),
                }
            }

            // 6. Explore.
            self.scans = 0;
            return MacroAction::MoveForward(self.config.explore_step);
        }
    }

    fn steer(&self, pose: &Pose, d: &SectorDescriptor, target: Vector3<f64>) -> MacroAction {
        let cam = hsd::camera_coords(pose, &target);
        let bearing = (-cam.x).atan2(cam.z);
        match (d.col(), d.row()) {
            (0, _) => MacroAction::TurnLeft(bearing),
            (2, _) => MacroAction::TurnRight(-bearing),
            (_, 0) => MacroAction::Ascend(cam.y),
            (_, 2) => MacroAction::Descend(-cam.y),
            _ => MacroAction::MoveForward(cam.z.min(self.config.max_forward)),
        }
    }

    /// Follows the first edge of the remembered route to `target`.
    fn replay(&mut self, pose: &Pose, target: &str, landmarks: &[Landmark]) -> Option<MacroAction> {
        let radius = self.config.goal_radius;
        for _ in 0..=self.memory.node_count() {
            let current = self.memory.current.clone()?;
            let node = self
                .memory
                .nodes
                .keys()
                .filter(|n| matches_name(target, n))
                .find(|n| self.memory.backtrack(&current, n).is_ok())?
                .clone();
            let (to, fragment) = {
                let path = self.memory.backtrack(&current, &node).ok()?;
                let first = path.first()?;
                (first.to.clone(), first.fragment.clone())
            };
            let pos = self
                .memory
                .position(&to)
                .or_else(|| landmarks.iter().find(|l| l.name == to).map(|l| l.position))?;
            if (pos - pose.position()).norm() <= radius {
                // Already there: advance along the route without re-recording.
                self.memory.current = Some(to);
                self.leg_length = 0.0;
                continue;
            }
            self.events.push(NavEvent::MemoryReplay { fragment, to });
            return Some(self.approach(pose, pos));
        }
        None
    }

    fn approach(&self, pose: &Pose, target: Vector3<f64>) -> MacroAction {
        let cam = hsd::camera_coords(pose, &target);
        let bearing = (-cam.x).atan2(cam.z);
        if bearing.abs() > self.config.heading_tolerance {
            return if bearing > 0.0 {
                MacroAction::TurnLeft(bearing)
            } else {
                MacroAction::TurnRight(-bearing)
            };
        }
        if cam.y.abs() > 0.5 * self.config.goal_radius {
            return if cam.y > 0.0 {
                MacroAction::Ascend(cam.y)
            } else {
                MacroAction::Descend(-cam.y)
            };
        }
        MacroAction::MoveForward(cam.z.min(self.config.max_forward))
    }
}

/// Outcome of driving a navigator with perfect, instantaneous execution.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicOutcome {
    pub actions: Vec<MacroAction>,
    pub pose: Pose,
    pub stopped: bool,
    pub error: Option<NavError>,
}

/// Executes macro-actions exactly: the pose jumps to each resolved setpoint.
pub fn run_kinematic(
    nav: &mut Navigator,
    start: Pose,
    landmarks: &[Landmark],
    model: &ModelParams,
) -> KinematicOutcome {
    let mut pose = start;
    let mut actions = Vec::new();
    loop {
        let action = match nav.decide_next(&pose, landmarks) {
            Ok(a) => a,
            Err(e) => {
                return KinematicOutcome {
                    actions,
                    pose,
                    stopped: false,
                    error: Some(e),
                };
            }
        };
        actions.push(action);
        let r = resolve_macro_action(&pose, &action, model);
        if r.stop {
            return KinematicOutcome {
                actions,
                pose,
                stopped: true,
                error: None,
            };
        }
        if let Some(reference) = r.reference {
            pose.state.position = reference.state.position;
        }
        pose.heading = r.heading;
    }
}
