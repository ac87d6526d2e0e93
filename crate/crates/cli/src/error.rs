use std::fmt;
use std::path::{Path, PathBuf};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const NOT_CONVERGED: i32 = 4;
}

/// A config problem, addressed by file, line and field where known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: Option<PathBuf>,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn new(line: Option<usize>, field: Option<String>, message: impl Into<String>) -> Self {
        Self {
            file: None,
            line,
            field,
            message: message.into(),
        }
    }

    pub fn in_file(mut self, path: &Path) -> Self {
        self.file = Some(path.to_path_buf());
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.file {
            Some(p) => write!(f, "{}", p.display())?,
            None => f.write_str("<config>")?,
        }
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        f.write_str(": ")?;
        if let Some(field) = &self.field {
            write!(f, "{field}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, source: std::io::Error },
    Config(ConfigError),
    /// An input data file failed to parse.
    Input { path: PathBuf, source: resfluor::Error },
    Numeric(resfluor::Error),
    /// The fit finished without converging; its result was still written.
    NotConverged(String),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Config(_) | CliError::Input { .. } | CliError::Usage(_) => exit::CONFIG,
            CliError::Numeric(e) => match e {
                resfluor::Error::RankDeficient(_) => exit::NOT_CONVERGED,
                resfluor::Error::Parse(_) => exit::CONFIG,
                _ => exit::NUMERIC,
            },
            CliError::NotConverged(_) => exit::NOT_CONVERGED,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Input { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Numeric(e) => write!(f, "{e}"),
            CliError::NotConverged(msg) => write!(f, "fit did not converge: {msg}"),
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<resfluor::Error> for CliError {
    fn from(e: resfluor::Error) -> Self {
        CliError::Numeric(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
