//! Experiment runner, CSV/SVG output and command-line interface for `qkl-core`.

pub mod cli;
pub mod error;
pub mod manifest;
pub mod oracle;
pub mod records;
pub mod runner;
pub mod svg;

pub use error::{QklError, Result};
