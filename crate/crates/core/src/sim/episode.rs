//! Closed-loop episode: navigator -> reference -> controller -> plant.

use log::{debug, info, warn};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::controller::{Controller, NmpcController, PidController, Reference, SolveDiagnostics};
use super::scenario::{ControllerKind, Scenario};
use super::SimError;
use crate::model::{step_rk4, wrap_angle, Input, ModelParams, Pose, State};
use crate::navigator::{resolve_macro_action, MacroAction, NavError, NavEvent, Navigator};
use crate::obstacle::{ConstantVelocity, ObstacleTrack};
use crate::panoc::SolveStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    /// Stopped within the goal radius.
    Success,
    /// Stopped somewhere else.
    Stopped,
    Collided,
    /// The solver or the integrator failed.
    Aborted,
    /// Ran out of macro-actions or simulated time.
    Budget,
}

impl EpisodeStatus {
    /// Process exit code: 0 success, 2 navigation failure, 3 solver abort.
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Success => 0,
            Self::Aborted => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub state: State,
    pub heading: f64,
    /// Input applied over `[t, t + dt)` (held on the terminal row).
    pub input: Input,
    pub reference: Vector3<f64>,
    pub heading_ref: f64,
    pub diagnostics: SolveDiagnostics,
    /// True obstacle centers at `t`.
    pub obstacles: Vec<Vector3<f64>>,
    /// Distance to the nearest obstacle center (infinite without obstacles).
    pub obs_dist_min: f64,
    /// Index into [`EpisodeTrace::actions`] of the active macro-action.
    pub action: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub scenario: String,
    pub controller: String,
    pub records: Vec<StepRecord>,
    pub status: EpisodeStatus,
    pub actions: Vec<MacroAction>,
    pub events: Vec<NavEvent>,
    /// Parameters the plant was integrated with (differs from the
    /// controller model when mismatch is enabled).
    pub plant: ModelParams,
    pub dt: f64,
    /// A collision happened at some point (the episode may have continued).
    pub collided: bool,
    pub message: Option<String>,
}

impl EpisodeTrace {
    pub fn final_state(&self) -> &State {
        &self.records.last().expect("trace is never empty").state
    }

    pub fn rate_limited_steps(&self) -> usize {
        self.records.iter().filter(|r| r.diagnostics.rate_limited).count()
    }

    pub fn solve_times_ms(&self) -> Vec<f64> {
        // The terminal row carries no solve.
        let n = self.records.len().saturating_sub(1);
        self.records[..n].iter().map(|r| r.diagnostics.solve_ms).collect()
    }
}

/// Seeded multiplicative perturbation of the physical parameters.
pub fn perturb_model(m: &ModelParams, percent: f64, seed: u64) -> ModelParams {
    if percent <= 0.0 {
        return *m;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = || 1.0 + percent / 100.0 * rng.gen_range(-1.0..=1.0);
    let mut p = *m;
    p.damping = p.damping.map(|a| a * f());
    p.roll_gain *= f();
    p.pitch_gain *= f();
    p.roll_time_constant *= f();
    p.pitch_time_constant *= f();
    p
}

pub fn build_controller(scenario: &Scenario, kind: ControllerKind) -> Box<dyn Controller> {
    match kind {
        ControllerKind::Nmpc => Box::new(NmpcController::new(
            scenario.model,
            scenario.weights,
            scenario.horizon,
            scenario.solver,
            ConstantVelocity,
        )),
        ControllerKind::Pid => Box::new(PidController::new(scenario.model, scenario.pid)),
    }
}

pub fn run_episode(scenario: &Scenario) -> Result<EpisodeTrace, SimError> {
    let mut controller = build_controller(scenario, scenario.controller);
    run_episode_with(scenario, controller.as_mut())
}

fn idle_diagnostics() -> SolveDiagnostics {
    SolveDiagnostics {
        status: SolveStatus::Converged,
        cost: 0.0,
        obstacle_residual: 0.0,
        rate_residual: 0.0,
        inner_iterations: 0,
        outer_iterations: 0,
        penalty: 0.0,
        rate_limited: false,
        solve_ms: 0.0,
    }
}

/// Moves `current` toward `target` by at most `speed * dt` meters, carrying
/// the ramp velocity in the reference state (`speed = 0`: jump).
fn ramp(current: &Reference, target: &Reference, speed: f64, dt: f64) -> Reference {
    let gap = target.state.position - current.state.position;
    let step = speed * dt;
    if step <= 0.0 || gap.norm() <= step {
        return *target;
    }
    let dir = gap / gap.norm();
    let mut r = *target;
    r.state.position = current.state.position + dir * step;
    r.state.velocity = dir * speed;
    r
}

fn truth(tracks: &[ObstacleTrack], t: f64, p: &Vector3<f64>) -> (Vec<Vector3<f64>>, f64) {
    let centers: Vec<_> = tracks.iter().map(|o| o.advance_truth(t)).collect();
    let nearest = centers.iter().map(|c| (p - c).norm()).fold(f64::INFINITY, f64::min);
    (centers, nearest)
}

fn collides(tracks: &[ObstacleTrack], t: f64, p: &Vector3<f64>) -> bool {
    tracks.iter().any(|o| (p - o.advance_truth(t)).norm() < o.radius)
}

/// Runs one episode with the given controller.
pub fn run_episode_with(scenario: &Scenario, controller: &mut dyn Controller) -> Result<EpisodeTrace, SimError> {
    scenario.validate()?;
    let model = scenario.model;
    let plant = perturb_model(&model, scenario.mismatch_percent, scenario.seed);
    let dt = model.dt;
    let limits = scenario.limits;
    let goal = scenario.goal_landmark().expect("validated").clone();

    let mut tracks = scenario
        .obstacles
        .iter()
        .map(|o| o.track())
        .collect::<Result<Vec<_>, _>>()?;
    let mut nav_config = scenario.navigator;
    nav_config.goal_radius = scenario.goal.radius;
    let mut navigator = Navigator::new(
        nav_config,
        scenario.reasoner.build()?,
        &scenario.instruction,
        &goal.name,
        scenario.memory.clone().unwrap_or_default(),
    );

    let start = scenario.initial_pose.pose();
    let mut state = start.state;
    let mut heading = start.heading;
    let mut heading_ref = heading;
    // `target` is where the active macro-action ends; `reference` is the
    // setpoint handed to the controller, ramped toward the target.
    let mut target = Reference::hover_at(state.position, &model);
    let mut reference = target;
    let mut actions: Vec<MacroAction> = Vec::new();
    let mut records: Vec<StepRecord> = Vec::new();
    let mut action_started = 0.0;
    let mut last_input = Input::hover(&model);
    let mut collided = false;
    let mut message = None;
    let max_steps = (limits.max_time / dt).ceil() as usize;

    let status = 'episode: {
        for k in 0..=max_steps {
            let t = k as f64 * dt;
            if k == max_steps {
                message = Some(format!("time limit of {} s reached", limits.max_time));
                break 'episode EpisodeStatus::Budget;
            }
            for o in &mut tracks {
                o.measure(t, dt);
            }

            let e = target.state.position - state.position;
            let settled = e.amax() < limits.settle_tolerance
                && state.velocity.norm() < limits.settle_speed
                && wrap_angle(heading_ref - heading).abs() < 1e-3;
            if k == 0 || settled || t - action_started >= limits.settle_timeout {
                let pose = Pose::new(state, heading_ref);
                let action = match navigator.decide_next(&pose, &scenario.landmarks) {
                    Ok(a) => a,
                    Err(NavError::BudgetExhausted(n)) => {
                        message = Some(format!("action budget of {n} exhausted"));
                        break 'episode EpisodeStatus::Budget;
                    }
                    Err(e) => return Err(SimError::Navigation(e)),
                };
                debug!("t={t:.2} action {action}");
                actions.push(action);
                action_started = t;
                let r = resolve_macro_action(&pose, &action, &model);
                if r.stop {
                    let dist = (state.position - goal.position).norm();
                    break 'episode if dist <= scenario.goal.radius {
                        EpisodeStatus::Success
                    } else {
                        EpisodeStatus::Stopped
                    };
                }
                if let Some(r) = r.reference {
                    target = r;
                }
                heading_ref = r.heading;
            }
            reference = ramp(&reference, &target, limits.reference_speed, dt);

            let (input, diagnostics) = match controller.control(&state, &reference, &tracks) {
                Ok(v) => v,
                Err(e) => {
                    message = Some(format!("solver error: {e}"));
                    break 'episode EpisodeStatus::Aborted;
                }
            };
            if diagnostics.status == SolveStatus::Diverged {
                message = Some(format!("solver diverged at t={t:.2}"));
                break 'episode EpisodeStatus::Aborted;
            }
            let (obstacles, obs_dist_min) = truth(&tracks, t, &state.position);
            records.push(StepRecord {
                t,
                state,
                heading,
                input,
                reference: reference.state.position,
                heading_ref,
                diagnostics,
                obstacles,
                obs_dist_min,
                action: actions.len().checked_sub(1),
            });
            last_input = input;

            state = match step_rk4(&state, &input, &plant) {
                Ok(s) => s,
                Err(e) => {
                    message = Some(format!("plant integration failed at t={t:.2}: {e}"));
                    // Keep the trace self-consistent: the last row is the last valid state.
                    let last = records.pop().expect("just pushed");
                    state = last.state;
                    break 'episode EpisodeStatus::Aborted;
                }
            };
            let slew = limits.yaw_rate * dt;
            heading = wrap_angle(heading + wrap_angle(heading_ref - heading).clamp(-slew, slew));

            if collides(&tracks, t + dt, &state.position) && !collided {
                collided = true;
                warn!("{}: collision at t={:.2}", scenario.name, t + dt);
                if limits.halt_on_collision {
                    message = Some(format!("collision at t={:.2}", t + dt));
                    // Terminal row below is at t + dt.
                    let (obstacles, obs_dist_min) = truth(&tracks, t + dt, &state.position);
                    records.push(StepRecord {
                        t: t + dt,
                        state,
                        heading,
                        input: last_input,
                        reference: reference.state.position,
                        heading_ref,
                        diagnostics: idle_diagnostics(),
                        obstacles,
                        obs_dist_min,
                        action: actions.len().checked_sub(1),
                    });
                    return Ok(finish(
                        scenario,
                        controller,
                        records,
                        EpisodeStatus::Collided,
                        actions,
                        navigator,
                        plant,
                        dt,
                        collided,
                        message,
                    ));
                }
            }
        }
        unreachable!("loop breaks at max_steps")
    };

    // Every break leaves `state` one step after the last recorded row.
    let t = records.last().map(|r| r.t + dt).unwrap_or(0.0);
    let (obstacles, obs_dist_min) = truth(&tracks, t, &state.position);
    records.push(StepRecord {
        t,
        state,
        heading,
        input: last_input,
        reference: reference.state.position,
        heading_ref,
        diagnostics: idle_diagnostics(),
        obstacles,
        obs_dist_min,
        action: actions.len().checked_sub(1),
    });
    let status = if collided && status == EpisodeStatus::Success {
        EpisodeStatus::Collided
    } else {
        status
    };
    Ok(finish(
        scenario, controller, records, status, actions, navigator, plant, dt, collided, message,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    scenario: &Scenario,
    controller: &dyn Controller,
    records: Vec<StepRecord>,
    status: EpisodeStatus,
    actions: Vec<MacroAction>,
    navigator: Navigator,
    plant: ModelParams,
    dt: f64,
    collided: bool,
    message: Option<String>,
) -> EpisodeTrace {
    info!(
        "{} [{}]: {:?} after {} steps, {} actions",
        scenario.name,
        controller.name(),
        status,
        records.len(),
        actions.len()
    );
    EpisodeTrace {
        scenario: scenario.name.clone(),
        controller: controller.name().to_string(),
        records,
        status,
        actions,
        events: navigator.events().to_vec(),
        plant,
        dt,
        collided,
        message,
    }
}
