use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("minimal sample is degenerate for {0}")]
    DegenerateSample(&'static str),
    #[error("gave up after {attempts} degenerate minimal samples")]
    SamplingExhausted { attempts: usize },
    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("bin height underflow: forgetting a point the tree never learned")]
    UnderflowViolation,
    #[error("ROC AUC needs both anomalous and genuine labels")]
    DegenerateLabels,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("window has {valid} valid pixels, the model family needs {required}")]
    WindowTooSparse { valid: usize, required: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(&'static str),
}
