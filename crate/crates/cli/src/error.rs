use std::io;

use gpsurrogate_core::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;
pub const EXIT_VERSION: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}: {1}")]
    Io(String, #[source] io::Error),
    #[error("{0}")]
    Data(String),
    #[error("model file version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Core(#[from] Error),
}

fn is_data_error(e: &Error) -> bool {
    match e {
        Error::InvalidData(_) | Error::DimensionMismatch { .. } | Error::ConstantInput { .. } | Error::ConstantOutput => {
            true
        }
        Error::Step { step: 0 | 1, source } => is_data_error(source),
        _ => false,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(..) | CliError::Data(_) => EXIT_DATA,
            CliError::Version { .. } => EXIT_VERSION,
            CliError::Core(Error::InvalidConfig(_)) => EXIT_USAGE,
            CliError::Core(e) if is_data_error(e) => EXIT_DATA,
            CliError::Core(_) => EXIT_PIPELINE,
        }
    }
}
