//! Command-line front end: argument grammar, the batch evaluation pipeline
//! and the subcommand bodies.

pub mod args;
pub mod commands;
pub mod config;
pub mod eval;

pub use args::{run, Cli};
pub use commands::{cmd_correlate, cmd_eval, cmd_report, cmd_train_projector};
pub use config::{RunConfig, Scenario, ZMode};
pub use eval::{evaluate, EvalInputs, EvalOptions};
