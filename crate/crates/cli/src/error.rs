use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use archk::gp::GpError;
use archk::io::IoError;
use archk::kernel::KernelError;
use archk::space::SpaceError;
use archk::verify::VerifyError;

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 1: a file could not be read or written.
    Io(String),
    /// Exit 2: invalid input or a failed check.
    Domain(String),
    /// Exit 3: the Gram matrix could not be factorized.
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn domain(msg: impl fmt::Display) -> Self {
        CliError::Domain(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) | CliError::Domain(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<SpaceError> for CliError {
    fn from(e: SpaceError) -> Self {
        CliError::domain(e)
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        CliError::domain(e)
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::domain(e)
    }
}

impl From<GpError> for CliError {
    fn from(e: GpError) -> Self {
        match e {
            GpError::NotFactorizable { .. } => CliError::Numerical(e.to_string()),
            other => CliError::domain(other),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(err) => CliError::Io(err.to_string()),
            other => CliError::domain(other),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::domain(format!("json: {e}"))
    }
}
