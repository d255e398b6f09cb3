//! Command-line front end and file formats for `gpsurrogate-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod model_file;
pub mod report;

pub use cli::run;
pub use error::CliError;
