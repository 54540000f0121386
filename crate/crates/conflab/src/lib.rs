//! Experiment front end for `conflab-core`: JSON configuration, dataset and
//! record file formats, and the preset experiment grids behind the `conflab`
//! binary.

// Comparisons written as `!(x > 0.0)` are deliberate: they reject NaN along
// with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

pub use config::{ExperimentConfig, ExperimentKind, MethodName};
pub use error::{CliError, Result};
