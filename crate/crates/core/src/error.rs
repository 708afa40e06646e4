use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by simulation, optimization and scenario handling.
///
/// Vehicle numbers in messages are 1-based platoon positions (1 is the
/// vehicle directly behind the leader).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlatoonError {
    #[error("domain error: {quantity} = {value} is outside the model domain")]
    Domain { quantity: &'static str, value: f64 },

    #[error("collision: vehicle {vehicle} has headway {gap:.6} m at t = {time:.4} s")]
    Collision { vehicle: usize, time: f64, gap: f64 },

    #[error("infeasible initial condition: {0}")]
    InfeasibleInitial(String),

    #[error("time {time} s is outside the horizon [0, {horizon}] s")]
    OutOfRange { time: f64, horizon: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("leader trajectory does not cover t = {time} s (ends at {end} s)")]
    LeaderCoverage { time: f64, end: f64 },

    #[error("invalid leader data: {0}")]
    LeaderValidation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl PlatoonError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        PlatoonError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// Errors caused by user input rather than by a failing computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PlatoonError::Config(_)
                | PlatoonError::Parse(_)
                | PlatoonError::LeaderValidation(_)
                | PlatoonError::InfeasibleInitial(_)
                | PlatoonError::GridMismatch(_)
        )
    }
}

pub type Result<T, E = PlatoonError> = std::result::Result<T, E>;
