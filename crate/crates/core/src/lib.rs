//! Simulated reinforcement learning from implicit human feedback.
//!
//! The crate wires five subsystems into one closed loop:
//!
//! * [`signal`] — synthetic per-subject EEG epochs (error-related potentials
//!   over 1/f noise) and the preprocessing chain (band-pass, resample,
//!   common-average reference, binned features).
//! * [`decoder`] — a linear-logistic error decoder trained with
//!   cross-entropy, plus the leave-one-subject-out evaluation harness.
//! * [`envsim`] — a planar kinematic pick-and-place environment with four
//!   disc obstacles, sparse/dense rewards and an ideal-path reference.
//! * [`feedback`] — the simulated observer, the streaming epoch ring and the
//!   reward transform `r = 1 - p_err` blended into the composite reward.
//! * [`agent`] — Soft Actor-Critic with explicit backward passes, replay,
//!   twin critics and automatic entropy temperature.
//!
//! [`eval`] computes trajectory metrics and phase tables; [`exp`] runs
//! seeded condition grids and emits CSV/SVG/JSON artifacts.

pub mod agent;
pub mod config;
pub mod decoder;
pub mod envsim;
pub mod eval;
pub mod exp;
pub mod feedback;
pub mod rng;
pub mod signal;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value or layout.
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was called outside its contract.
    #[error("contract violation: {0}")]
    Contract(String),
    /// Decoder training could not proceed.
    #[error("training error: {0}")]
    Training(String),
    /// Config validation report; one entry per offending key.
    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    /// Result sets cannot be merged; one entry per differing field.
    #[error("incompatible results:\n{}", .0.join("\n"))]
    Incompatible(Vec<String>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
