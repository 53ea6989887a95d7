//! Command-line front end for the chemotaxis lab: configuration parsing,
//! command runners and CSV output.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

pub use commands::CliError;
pub use config::{ConfigError, InitialDatum, RunConfig};
