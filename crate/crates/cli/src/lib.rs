//! Command-line driver for the `kcnet` library.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod model_file;
pub mod output;

pub use commands::{dispatch, Cli};
pub use config::RunConfig;
pub use error::{exit, CliError, CliResult};
pub use model_file::SavedModel;

/// Prints one line to stdout; a closed pipe (e.g. `| head`) is not an error.
pub(crate) fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}
