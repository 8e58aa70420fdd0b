use std::fmt;
use std::path::PathBuf;

use rigforge_core::Error as CoreError;
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    /// Missing, unreadable or malformed configuration.
    Config { message: String, path: Option<PathBuf> },
    Core(CoreError),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config {
            message: message.into(),
            path: None,
        }
    }

    /// 2 for bad inputs, 3 for failures while computing on valid inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_runtime() => 3,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({
            "kind": match self {
                CliError::Config { .. } => "config",
                CliError::Core(e) => e.kind(),
            },
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        let path = match self {
            CliError::Config { path, .. } => path.clone(),
            CliError::Core(CoreError::Schema { path, .. } | CoreError::Io { path, .. }) => Some(path.clone()),
            _ => None,
        };
        if let Some(p) = path {
            body["path"] = json!(p);
        }
        if let CliError::Core(CoreError::Infeasible { step, .. }) = self {
            body["step"] = json!(step);
        }
        json!({ "error": body })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { message, path: Some(p) } => write!(f, "config error in {}: {message}", p.display()),
            CliError::Config { message, path: None } => write!(f, "config error: {message}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}
