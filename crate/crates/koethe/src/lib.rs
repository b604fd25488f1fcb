//! File formats and command implementations behind the `koethe` binary.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;

pub use error::CliError;
