//! CLI error type with machine-readable JSON rendering and exit codes.

use odnmr_core::CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Config parsing/validation failure (exit 2).
    Validation {
        message: String,
        field: Option<String>,
    },
    /// Numerical failure during a run (exit 3).
    Numerical { message: String },
    /// Filesystem failure (exit 4).
    Io { message: String },
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation {
            message: message.into(),
            field: None,
        }
    }

    pub fn validation_field(field: &str, message: impl Into<String>) -> Self {
        CliError::Validation {
            message: message.into(),
            field: Some(field.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, message, field) = match self {
            CliError::Validation { message, field } => ("validation", message, field.clone()),
            CliError::Numerical { message } => ("numerical", message, None),
            CliError::Io { message } => ("io", message, None),
        };
        let mut obj = serde_json::json!({
            "error": { "kind": kind, "message": message }
        });
        if let Some(f) = field {
            obj["error"]["field"] = serde_json::Value::String(f);
        }
        serde_json::to_string(&obj).expect("error serializes")
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        CliError::Numerical {
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io {
            message: err.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation { message, field } => match field {
                Some(name) => write!(f, "validation error on `{name}`: {message}"),
                None => write!(f, "validation error: {message}"),
            },
            CliError::Numerical { message } => write!(f, "numerical error: {message}"),
            CliError::Io { message } => write!(f, "io error: {message}"),
        }
    }
}
