use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A label id is not valid for the class count in use.
    #[error("label {label} at pixel {pixel} is out of range for {classes} classes")]
    LabelOutOfRange {
        pixel: usize,
        label: u32,
        classes: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid scene: {0}")]
    InvalidSpec(String),

    /// A loss or parameter became non-finite during training.
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: u64, detail: String },

    #[error("numerical instability: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}

pub(crate) use config_err;
pub(crate) use shape_err;
