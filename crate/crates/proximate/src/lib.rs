//! Files, experiment runner and command-line front end for
//! `proximate-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod manifest;

pub use error::CliError;
