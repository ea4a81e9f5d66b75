//! File formats, reports and the command-line harness around `gsda-core`.

pub mod cli;
pub mod commands;
mod error;
pub mod io;
pub mod manifest;
pub mod plot;
pub mod report;

pub use error::{Error, Result};
pub use gsda_core as core;
