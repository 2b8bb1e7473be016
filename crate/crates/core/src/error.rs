use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("input of {len} tokens exceeds backend limit of {max}")]
    InputTooLong { len: usize, max: usize },

    #[error("backend '{0}' does not support fine-tuning")]
    TuningUnsupported(String),

    #[error("backend '{0}' is not available in this build")]
    BackendUnavailable(String),

    #[error("no maskable content ({guard_skips} sentence(s) removed by guard)")]
    NoMaskableContent { guard_skips: u32 },

    #[error("empty tuning sample list")]
    EmptyTuningSet,

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("inconsistent masking plan: {0}")]
    PlanInconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
