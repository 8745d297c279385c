//! File formats, cohort loading and the `gmdmr` command-line tool built on
//! [`gmdmr_core`].

pub mod cli;
pub mod cohort;
pub mod config;
pub mod csvio;
pub mod error;
pub mod output;

pub use error::CliError;
