//! Nine-sector spatial descriptor: where a landmark sits in the forward view.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::model::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Landmark {
    pub name: String,
    pub position: Vector3<f64>,
    #[serde(default)]
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorDescriptor {
    pub landmark: String,
    /// 0 (top-left) .. 8 (bottom-right), row-major.
    pub sector: u8,
    pub heading: f64,
    /// Normalized image coordinates, x to the right, y downward.
    pub x_hat: f64,
    pub y_hat: f64,
    pub range: f64,
}

impl SectorDescriptor {
    pub fn row(&self) -> u8 {
        self.sector / 3
    }

    pub fn col(&self) -> u8 {
        self.sector % 3
    }
}

const SECTOR_NAMES: [&str; 9] = [
    "upper-left",
    "upper-center",
    "upper-right",
    "center-left",
    "center",
    "center-right",
    "lower-left",
    "lower-center",
    "lower-right",
];

impl fmt::Display for SectorDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} in sector #{} ({}), {:.1} m",
            self.landmark, self.sector, SECTOR_NAMES[self.sector as usize], self.range
        )
    }
}

fn third(v: f64) -> u8 {
    if v <= 1.0 / 3.0 {
        0
    } else if v <= 2.0 / 3.0 {
        1
    } else {
        2
    }
}

/// Sector of a point in `[0,1]^2`; points on a boundary go to the lower index.
pub fn sector_of(x_hat: f64, y_hat: f64) -> u8 {
    3 * third(y_hat) + third(x_hat)
}

/// Camera-frame coordinates (right, up, forward) of `p` seen from `pose`.
/// The camera looks along the heading, level with the horizon.
pub fn camera_coords(pose: &Pose, p: &Vector3<f64>) -> Vector3<f64> {
    let d = p - pose.position();
    let (s, c) = pose.heading.sin_cos();
    let forward = d.x * c + d.y * s;
    let left = -d.x * s + d.y * c;
    Vector3::new(-left, d.z, forward)
}

/// Projects the landmark center into the heading-aligned pinhole view with
/// square field of view `fov`. `None` when behind the camera or outside the
/// frustum.
pub fn hsd_verbalize(pose: &Pose, lm: &Landmark, fov: f64) -> Option<SectorDescriptor> {
    let cam = camera_coords(pose, &lm.position);
    if cam.z <= 0.0 {
        return None;
    }
    let half = (0.5 * fov).tan();
    let x_hat = 0.5 + cam.x / (2.0 * half * cam.z);
    let y_hat = 0.5 - cam.y / (2.0 * half * cam.z);
    if !(0.0..=1.0).contains(&x_hat) || !(0.0..=1.0).contains(&y_hat) {
        return None;
    }
    Some(SectorDescriptor {
        landmark: lm.name.clone(),
        sector: sector_of(x_hat, y_hat),
        heading: pose.heading,
        x_hat,
        y_hat,
        range: (lm.position - pose.position()).norm(),
    })
}

/// Descriptors for every landmark in view and within `max_range`, sorted by name.
pub fn describe_view(pose: &Pose, landmarks: &[Landmark], fov: f64, max_range: f64) -> Vec<SectorDescriptor> {
    let mut out: Vec<_> = landmarks
        .iter()
        .filter_map(|lm| hsd_verbalize(pose, lm, fov))
        .filter(|d| d.range <= max_range)
        .collect();
    out.sort_by(|a, b| a.landmark.cmp(&b.landmark));
    out
}
