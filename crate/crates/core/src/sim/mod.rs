//! Closed-loop simulation: scenarios, episodes, metrics and artifacts.

pub mod controller;
pub mod episode;
pub mod metrics;
pub mod output;
pub mod scenario;
pub mod suite;

use std::path::Path;

use thiserror::Error;

use crate::navigator::NavError;
use crate::obstacle::ObstacleError;

pub use controller::{Controller, NmpcController, PidController, PidGains, Reference, SolveDiagnostics};
pub use episode::{run_episode, run_episode_with, EpisodeStatus, EpisodeTrace, StepRecord};
pub use metrics::{compute_metrics, Metrics};
pub use output::{emit_csv, emit_svg_plots, TraceTable};
pub use scenario::{ControllerKind, Scenario};
pub use suite::{run_suite, SuiteReport};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Obstacle(#[from] ObstacleError),
    #[error(transparent)]
    Navigation(NavError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl SimError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, e: csv::Error) -> Self {
        Self::Format(format!("{}: {e}", path.display()))
    }
}
