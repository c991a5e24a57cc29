//! Command-line front end: scenario files, output writers and the commands
//! behind the `randmix` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod shape;
pub mod validate;

pub use commands::RunOptions;
pub use config::{BuiltModel, Format, ScenarioConfig};
