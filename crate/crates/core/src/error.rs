use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid model configuration: {0}")]
    Model(String),

    #[error("invalid stepper configuration: {0}")]
    Stepper(String),

    #[error("blow-up at step {step} (t = {time}): L2 norm {norm}")]
    BlowUp { step: usize, time: f64, norm: f64 },

    #[error("invalid diagnostic input: {0}")]
    Diagnostic(String),
}

pub type Result<T> = core::result::Result<T, Error>;
