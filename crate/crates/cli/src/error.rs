use thiserror::Error;

use punctum_core::modulus::ModulusError;
use punctum_core::orbit::OrbitError;
use punctum_core::raster::RasterError;
use punctum_core::verify::VerifyError;

/// Exit codes: 0 success, 1 verification failure, 2 usage or config error,
/// 3 precondition error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("verification failed")]
    VerificationFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerificationFailed => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Precondition(_) => 3,
        }
    }
}

impl From<ModulusError> for CliError {
    fn from(e: ModulusError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        match e {
            RasterError::Io(io) => CliError::Io(io),
            RasterError::Orbit(o) => o.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Invalid(m) => CliError::Config(m),
            VerifyError::Raster(r) => r.into(),
            other => CliError::Precondition(other.to_string()),
        }
    }
}
