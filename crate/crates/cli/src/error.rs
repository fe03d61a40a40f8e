use geolens_core::Error as CoreError;

/// Command failure, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed input file (exit 2).
    #[error("{0}")]
    Parse(String),
    /// Well-formed input that breaks a precondition, or an unreadable path (exit 3).
    #[error("{0}")]
    Validation(String),
    /// A postcondition the tool checks on its own output failed (exit 4).
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parse { .. } | CoreError::Record { .. } => CliError::Parse(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Adds the offending file to a core error.
pub fn in_file(path: &std::path::Path) -> impl Fn(CoreError) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    }
}
