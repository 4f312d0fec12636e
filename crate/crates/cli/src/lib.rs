//! Batch front-end for distributional gradient boosting: configuration,
//! CSV input and output, and the `fit`, `cv`, `simulate` and `predict`
//! commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use commands::{cmd_cv, cmd_fit, cmd_predict, cmd_simulate, ModelFile, SimulateArgs};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
