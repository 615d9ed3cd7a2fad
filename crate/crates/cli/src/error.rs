use std::fmt;

/// Process exit statuses. The numeric values are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Schema = 2,
    Linking = 3,
    Generation = 4,
    Cot = 5,
    Scoring = 6,
    GrpoInput = 7,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl fmt::Display) -> Self {
        Self { kind, message: message.to_string() }
    }

    pub fn schema(message: impl fmt::Display) -> Self {
        Self::new(ExitKind::Schema, message)
    }

    pub fn code(&self) -> u8 {
        self.kind.code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Attaches an exit kind to any displayable error.
pub trait OrExit<T> {
    fn or_exit(self, kind: ExitKind) -> Result<T, CliError>;
}

impl<T, E: fmt::Display> OrExit<T> for Result<T, E> {
    fn or_exit(self, kind: ExitKind) -> Result<T, CliError> {
        self.map_err(|e| CliError::new(kind, e))
    }
}
