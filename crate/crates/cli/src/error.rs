use radon_core::LabError;

/// Harness failure; `module` names where it arose.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("[{module}] configuration error: {message}")]
    Config { module: &'static str, message: String },
    #[error("[{module}] {source}")]
    Core { module: &'static str, source: LabError },
    #[error("[output] {0}")]
    Io(#[from] std::io::Error),
    #[error("[output] {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn config(module: &'static str, message: impl Into<String>) -> CliError {
        CliError::Config { module, message: message.into() }
    }

    pub fn core(module: &'static str, source: LabError) -> CliError {
        CliError::Core { module, source }
    }

    /// Process exit status: configuration and budget problems are `2`.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Tags core results with the module they came from.
pub trait Provenance<T> {
    fn within(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> Provenance<T> for radon_core::Result<T> {
    fn within(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::core(module, e))
    }
}
