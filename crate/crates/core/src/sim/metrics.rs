//! Episode metrics: success, success weighted by path length, navigation error.

use nalgebra::Vector3;
use serde::Serialize;

use super::episode::EpisodeTrace;
use super::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// 1 if the episode ended within the goal radius, else 0.
    pub sr: f64,
    pub spl: f64,
    /// Final distance to the goal center (m).
    pub ne: f64,
    pub path_length: f64,
    /// Straight-line start-to-goal length used for SPL (m).
    pub reference_length: f64,
    /// Closest approach to any obstacle center (m).
    pub min_clearance: f64,
}

/// `sr * l / max(l, path)`.
pub fn spl(success: bool, l: f64, path_length: f64) -> f64 {
    if success {
        l / l.max(path_length)
    } else {
        0.0
    }
}

pub fn path_length(positions: &[Vector3<f64>]) -> f64 {
    positions.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Metrics from a flown path alone.
pub fn metrics_from_path(
    positions: &[Vector3<f64>],
    obs_dist: &[f64],
    goal: &Vector3<f64>,
    goal_radius: f64,
    l: f64,
) -> Metrics {
    let ne = positions.last().map(|p| (p - goal).norm()).unwrap_or(f64::INFINITY);
    let success = ne <= goal_radius;
    let path = path_length(positions);
    Metrics {
        sr: if success { 1.0 } else { 0.0 },
        spl: spl(success, l, path),
        ne,
        path_length: path,
        reference_length: l,
        min_clearance: obs_dist.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

pub fn compute_metrics(trace: &EpisodeTrace, scenario: &Scenario, l: f64) -> Metrics {
    let positions: Vec<_> = trace.records.iter().map(|r| r.state.position).collect();
    let dist: Vec<_> = trace.records.iter().map(|r| r.obs_dist_min).collect();
    let goal = scenario
        .goal_landmark()
        .map(|g| g.position)
        .unwrap_or_else(|| Vector3::repeat(f64::NAN));
    metrics_from_path(&positions, &dist, &goal, scenario.goal.radius, l)
}

/// Time at which the first obstacle's center passes horizontally closest to
/// the start-to-goal segment, sampled every `dt` over the episode. `None`
/// without obstacles.
pub fn encounter_time(scenario: &Scenario, dt: f64) -> Option<f64> {
    let track = scenario.obstacles.first()?.track().ok()?;
    let a = scenario.initial_pose.position.xy();
    let b = scenario.goal_landmark()?.position.xy();
    let ab = b - a;
    let seg_dist = |p: nalgebra::Vector2<f64>| {
        let s = if ab.norm_squared() > 0.0 {
            ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (p - (a + s * ab)).norm()
    };
    let steps = (scenario.limits.max_time / dt).round() as usize;
    (0..=steps)
        .map(|k| k as f64 * dt)
        .map(|t| (t, seg_dist(track.advance_truth(t).xy())))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(t, _)| t)
}

/// Largest inf-norm position tracking error over records with `t >= from`.
pub fn max_tracking_error_after(trace: &EpisodeTrace, from: f64) -> f64 {
    trace
        .records
        .iter()
        .filter(|r| r.t >= from)
        .map(|r| (r.reference - r.state.position).amax())
        .fold(0.0, f64::max)
}
