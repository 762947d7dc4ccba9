use isl_core::IslError;
use serde::Serialize;

/// Failure of a subcommand, rendered as one JSON object on stderr.
#[derive(Debug)]
pub enum CliError {
    /// The config or an argument does not parse or validate. `key` is the
    /// dotted path of the offending field when one can be named.
    Config { key: Option<String>, message: String },
    Io { path: String, message: String },
    /// Training or evaluation failed numerically (divergence, bad shapes, ...).
    Numeric(IslError),
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    key: Option<&'a str>,
    message: String,
}

impl CliError {
    pub fn config(key: Option<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key,
            message: message.into(),
        }
    }

    pub fn io(path: impl std::fmt::Display, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_string(),
            message: err.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Numeric(_) => "numeric",
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            CliError::Config { key, .. } => key.as_deref(),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        let message = match self {
            CliError::Config { message, .. } => message.clone(),
            CliError::Io { path, message } => format!("{path}: {message}"),
            CliError::Numeric(e) => e.to_string(),
        };
        serde_json::to_string(&ErrorJson {
            error: self.kind(),
            key: self.key(),
            message,
        })
        .expect("plain strings serialize")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_json())
    }
}

impl std::error::Error for CliError {}

impl From<IslError> for CliError {
    fn from(e: IslError) -> Self {
        match e {
            IslError::InvalidConfig(m)
            | IslError::InvalidNoise(m)
            | IslError::InvalidTarget(m)
            | IslError::InvalidGenerator(m) => CliError::config(None, m),
            IslError::Io(err) => CliError::Io {
                path: String::new(),
                message: err.to_string(),
            },
            other => CliError::Numeric(other),
        }
    }
}
