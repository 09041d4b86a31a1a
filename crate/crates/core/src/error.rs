use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::Vec2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("Newton iteration from seed ({}, {}) did not converge in {iterations} iterations", seed.x, seed.y)]
    NonConvergence { seed: Vec2, iterations: usize },

    #[error("descent start ({}, {}) is already stationary (|grad V| = {gradient_norm:e})", start.x, start.y)]
    StationaryStart { start: Vec2, gradient_norm: f64 },

    #[error("descent path left the bounding box at ({}, {})", at.x, at.y)]
    PathEscape { at: Vec2 },

    #[error("adaptive step fell below {min_step:e} at ({}, {})", at.x, at.y)]
    StepUnderflow { at: Vec2, min_step: f64 },

    #[error("reaction path topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("wave packet does not fit in the grid: {0}")]
    PacketTooWide(String),

    #[error("wave function norm {norm} outside tolerance")]
    NotNormalized { norm: f64 },

    #[error("density leaked to the grid boundary: edge fraction {fraction:e} at t = {t}")]
    BoundaryLeak { fraction: f64, t: f64 },

    #[error("particle left the grid at ({}, {})", at.x, at.y)]
    OutOfGrid { at: Vec2 },

    #[error("expected a {expected} trajectory, got {found}")]
    WrongTrajectoryKind { expected: &'static str, found: &'static str },

    #[error("trajectories do not share a time axis: {0}")]
    TimeAxisMismatch(String),

    #[error("paired trajectories start from different initial conditions (deviation {deviation:e})")]
    InitialConditionMismatch { deviation: f64 },

    #[error("probability series ends at t = {t_end}, need t >= {required}")]
    SeriesTooShort { t_end: f64, required: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.into(), reason: reason.into() }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Config { .. } | Error::Format(_)
        )
    }
}
