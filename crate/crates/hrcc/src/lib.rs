//! Simulation harness, configuration files and file formats around
//! [`hrcc_core`], plus the `hrcc` command-line tool.

pub mod config;
mod error;
pub mod io;
pub mod sim;

pub use error::Error;
