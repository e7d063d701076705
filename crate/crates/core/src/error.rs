use thiserror::Error;

/// Grid axis, used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    S,
    T,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::S => write!(f, "s (base)"),
            Axis::T => write!(f, "t (fiber)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("boundary closure failed on axis {axis}: {reason}")]
    BoundaryClosure { axis: Axis, reason: String },
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("positivity failure: smallest value {value:.3e} at node (s={s:.4}, t={t:.4})")]
    Positivity { value: f64, s: f64, t: f64 },
    #[error("relative cscK check failed: fiber scalar curvature spread {spread:.3e} at s={s:.4}")]
    NotRelativelyCsck { spread: f64, s: f64 },
    #[error("flow leaves the truncation window at s={s:.4} (shift {shift:.3}); enlarge t_range")]
    Horizon { s: f64, shift: f64 },
    #[error("fiber matching failed at s={s:.4}: mismatch {mismatch:.3e}")]
    Matching { s: f64, mismatch: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("path times must be strictly increasing and uniform")]
    BadTimes,
    #[error("degenerate class data: {0}")]
    Degenerate(String),
    #[error("inconsistent weight data: {0}")]
    WeightData(String),
    #[error("invalid degeneration: {0}")]
    InvalidSpec(String),
    #[error("degeneration not aligned with the torus action: {0}")]
    NotAligned(String),
    #[error("j = {j} is outside the nef window (need j >= {min})")]
    EnlargeJ { j: i64, min: i64 },
    #[error("field format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
