//! Command implementations behind the `weatherpair` binary.

pub mod commands;
pub mod review;

pub use commands::{Cli, Command, Status};
