//! Stage orchestration for the `cishtex` command-line tool.

pub mod config;
pub mod error;
pub mod stages;

pub use config::RunConfig;
pub use error::{CliError, Result};
