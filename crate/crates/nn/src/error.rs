use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("{op}: data length {len} does not match shape {shape:?}")]
    DataLength {
        op: &'static str,
        len: usize,
        shape: Vec<usize>,
    },
    #[error("{op}: extent {extent} (padded) minus kernel {kernel} is not divisible by stride {stride}")]
    NonIntegralOutput {
        op: &'static str,
        extent: usize,
        kernel: usize,
        stride: usize,
    },
    #[error("{op}: window {window:?} larger than input {input:?}")]
    WindowTooLarge {
        op: &'static str,
        window: Vec<usize>,
        input: Vec<usize>,
    },
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, NnError>;
