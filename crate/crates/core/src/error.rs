use thiserror::Error;

pub type Result<T, E = GaitError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GaitError {
    #[error("time {t} precedes step start {t_start}")]
    InvalidTime { t: f64, t_start: f64 },

    #[error("step duration must be positive, got {0}")]
    InvalidClock(f64),

    #[error("phase {0} outside [0, 1]")]
    Domain(f64),

    #[error("{what}: expected length {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("observation error: {0}")]
    Observation(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("command ({vx}, {vy}) outside the command box")]
    Command { vx: f64, vy: f64 },

    #[error("environment state error: {0}")]
    State(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("trace error: {0}")]
    Trace(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GaitError {
    pub(crate) fn dim(what: &'static str, expected: usize, actual: usize) -> Self {
        GaitError::Dimension {
            what,
            expected,
            actual,
        }
    }
}
