use std::fmt;

use tlshm::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_ARTIFACT: i32 = 4;
pub const EXIT_DATA: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }

    pub fn artifact(message: impl Into<String>) -> Self {
        Self::new(EXIT_ARTIFACT, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(EXIT_DATA, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_) | Error::InvalidScenario { .. } | Error::InvalidSpec(_) | Error::Usage(_) => EXIT_CONFIG,
            Error::SimulationDivergence { .. } | Error::Generation { .. } | Error::ModelDefinition(_) | Error::Numerical(_) => {
                EXIT_SIMULATION
            }
            Error::CorruptCheckpoint(_) | Error::CorruptDataset(_) | Error::LayerMismatch { .. } | Error::Io(_) | Error::Json(_) => {
                EXIT_ARTIFACT
            }
            Error::Data(_) | Error::Vocabulary(_) | Error::Shape(_) => EXIT_DATA,
            Error::Training { .. } => 1,
        };
        Self::new(code, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
