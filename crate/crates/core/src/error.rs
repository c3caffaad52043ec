use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("photon-number cutoff must be at least 1, got {0}")]
    InvalidCutoff(usize),

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("non-finite amplitude ({re}, {im})")]
    NonFiniteAmplitude { re: f64, im: f64 },

    #[error("efficiency {0} outside [0, 1]")]
    InvalidEfficiency(f64),

    #[error("transmission {0} outside (0, 1]")]
    InvalidTransmission(f64),

    #[error("cutoff n_max = {n_max} too small for |alpha| = {amplitude}: displaced row norm deficit {deficit:e}")]
    CutoffTooSmall {
        n_max: usize,
        amplitude: f64,
        deficit: f64,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("outcome probabilities sum to {0}, expected 1")]
    ProbabilityNormalization(f64),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("zero shots")]
    ZeroShots,

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
