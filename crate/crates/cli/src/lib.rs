//! Command-line front end: configuration loading, figure and table recipes,
//! and CSV emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod units;

pub use error::CliError;
