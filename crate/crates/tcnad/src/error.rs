use std::path::PathBuf;

use tcnad_core::CoreError;

/// Pipeline stage an error was raised in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Generate,
    Ingest,
    Window,
    Scale,
    Train,
    Detect,
    Inject,
    Evaluate,
    Report,
    Io,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Generate => "generate",
            Stage::Ingest => "ingest",
            Stage::Window => "window",
            Stage::Scale => "scale",
            Stage::Train => "train",
            Stage::Detect => "detect",
            Stage::Inject => "inject",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
            Stage::Io => "io",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ErrorKind {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Error with the stage it came from attached.
#[derive(Debug, thiserror::Error)]
#[error("stage={stage}: {kind}")]
pub struct Error {
    pub stage: Stage,
    pub kind: ErrorKind,
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

impl Error {
    pub fn new(stage: Stage, kind: impl Into<ErrorKind>) -> Self {
        Self {
            stage,
            kind: kind.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Stage::Config, ErrorKind::Config(message.into()))
    }

    pub fn io(stage: Stage, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::new(
            stage,
            ErrorKind::Io {
                path: path.into(),
                source,
            },
        )
    }

    pub fn format(stage: Stage, path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::new(
            stage,
            ErrorKind::Format {
                path: path.into(),
                message: message.into(),
            },
        )
    }

    pub fn exit_code(&self) -> i32 {
        match &self.kind {
            ErrorKind::Config(_) | ErrorKind::Core(CoreError::Config(_)) => exit::CONFIG,
            // an unreadable config file is a config problem, not a data one
            ErrorKind::Io { .. } if self.stage == Stage::Config => exit::CONFIG,
            ErrorKind::Core(
                CoreError::Singular { .. }
                | CoreError::NonFiniteLoss { .. }
                | CoreError::UndefinedMetric(_),
            ) => exit::NUMERIC,
            _ => exit::DATA,
        }
    }

    /// Single-line `key=value` rendering for stderr.
    pub fn one_line(&self) -> String {
        let class = match self.exit_code() {
            exit::CONFIG => "config",
            exit::NUMERIC => "numeric",
            _ => "data",
        };
        let msg = self.kind.to_string().replace(['\n', '\r'], " ");
        format!("error class={class} stage={} message={msg:?}", self.stage)
    }
}

/// Attaches a stage to core results.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> AtStage<T> for std::result::Result<T, CoreError> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| Error::new(stage, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(Error::config("x").exit_code(), exit::CONFIG);
        assert_eq!(
            Error::new(Stage::Train, CoreError::Config("lr".into())).exit_code(),
            exit::CONFIG
        );
        assert_eq!(
            Error::new(Stage::Detect, CoreError::Singular { lambda: 1e-12 }).exit_code(),
            exit::NUMERIC
        );
        assert_eq!(
            Error::new(Stage::Ingest, CoreError::EmptyData("x".into())).exit_code(),
            exit::DATA
        );
    }

    #[test]
    fn one_line_names_stage() {
        let e = Error::new(
            Stage::Ingest,
            CoreError::Parse {
                row: 7,
                channel: "BoostPres".into(),
                message: "line\nbreak".into(),
            },
        );
        let line = e.one_line();
        assert!(!line.contains('\n'));
        assert!(line.starts_with("error class=data stage=ingest "));
        assert!(line.contains("row 7"));
    }
}
