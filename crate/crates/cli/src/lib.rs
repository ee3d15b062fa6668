//! Implementation of the `actgrad` binary: training/evaluation runs over
//! [`actgrad_core`], metrics CSVs, checkpoints and run manifests.

pub mod checkpoint;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod metrics;

pub use error::{CliError, Result};
