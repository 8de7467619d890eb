//! Library side of the `gwrepro` command: configuration, stage runners for
//! the workflow engine, plotting and the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod svg;

pub use config::RunConfig;
pub use error::CliError;
pub use pipeline::{run_pipeline, PipelineRun, PipelineRunner};
