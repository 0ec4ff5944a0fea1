use std::path::PathBuf;

use noisehop_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("comparison failed: {0}")]
    Comparison(String),
}

pub type RunResult<T> = std::result::Result<T, RunError>;

impl RunError {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        RunError::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 pass, 1 config, 2 numerical failure, 3 comparison failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } | RunError::Io { .. } => 1,
            RunError::Core(e) if is_config_class(e) => 1,
            RunError::Core(_) => 2,
            RunError::Comparison(_) => 3,
        }
    }
}

fn is_config_class(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::Config(_)
            | CoreError::Resource { .. }
            | CoreError::SiteIndex { .. }
            | CoreError::WrongBuilder { .. }
            | CoreError::Shape(_)
            | CoreError::Boundary { .. }
            | CoreError::Mode(_)
    )
}

/// Attaches a config path to core errors that stem from bad input; numerical
/// failures pass through unchanged.
pub fn at(path: &str) -> impl Fn(CoreError) -> RunError + '_ {
    move |e| {
        if is_config_class(&e) {
            RunError::config(path, e.to_string())
        } else {
            RunError::Core(e)
        }
    }
}
