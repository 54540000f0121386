//! Error type shared by the core modules.

use alloc::string::String;
use core::fmt;

/// Errors produced by dataset construction, network evaluation, and the
/// numerical routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two shapes that must agree do not.
    ShapeMismatch { expected: String, got: String },
    /// A value violated its documented domain (rates, simplex rows, ...).
    InvalidArgument(String),
    /// A non-finite value showed up where only finite values are allowed.
    NonFinite(String),
    /// A batch whose total weight is zero cannot be normalized.
    DegenerateBatch,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { expected, got } => {
                write!(f, "shape mismatch: expected {expected}, got {got}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::DegenerateBatch => write!(f, "degenerate batch: total weight is zero"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
