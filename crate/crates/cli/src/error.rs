use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },

    #[error("unknown key `{key}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey {
        key: String,
        suggestion: Option<String>,
    },

    #[error("unknown section `[{section}]`{}", suggestion.as_ref().map(|s| format!(" (did you mean `[{s}]`?)")).unwrap_or_default())]
    UnknownSection {
        section: String,
        suggestion: Option<String>,
    },

    #[error("duplicate key `{key}` (first set on line {first})")]
    Duplicate { key: String, first: usize },

    #[error("malformed line: {0}")]
    Syntax(String),

    #[error("{path}: line {line}: {source}")]
    AtLine {
        path: String,
        line: usize,
        source: Box<CliError>,
    },

    #[error("{0}")]
    Usage(String),

    #[error("table {path}: line {line}: {message}")]
    Table {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] gcnsbm::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Usage-type errors exit with status 2, everything else with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Value { .. }
            | CliError::UnknownKey { .. }
            | CliError::UnknownSection { .. }
            | CliError::Duplicate { .. }
            | CliError::Syntax(_)
            | CliError::AtLine { .. }
            | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
