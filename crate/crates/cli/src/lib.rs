//! The `martlab` command-line harness: corpus generation, single checks,
//! suites with aggregated reports, and the RDE, Itô and Bellman demos.

// `!(a <= b)` is used on purpose so that NaN lands on the failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod commands;
pub mod error;
pub mod layers;
pub mod output;
pub mod suite;

pub use commands::{dispatch, Cli};
pub use error::{CliError, Exit, Result};
