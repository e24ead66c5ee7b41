use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a documented invariant.
    #[error("invalid {context}: {message}")]
    Config {
        context: &'static str,
        message: String,
    },

    /// A camera pose coincides with the actor, so no direction is defined.
    #[error("degenerate pose: {0}")]
    DegeneratePose(String),

    /// A time query fell outside the covered interval.
    #[error("time {t} s outside [{start}, {end}] s")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("numeric failure in {module}: {message}")]
    Numeric {
        module: &'static str,
        message: String,
    },

    /// The exhaustive planner refuses instances above its joint path budget.
    #[error("instance too large: {joint_paths} joint paths exceeds limit {limit}")]
    SizeLimit { joint_paths: u128, limit: u64 },

    #[error("cycle {cycle} (t = {time:.2} s): {source}")]
    Cycle {
        cycle: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(context: &'static str, message: impl Into<String>) -> Self {
        Error::Config {
            context,
            message: message.into(),
        }
    }

    pub(crate) fn numeric(module: &'static str, message: impl Into<String>) -> Self {
        Error::Numeric {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Innermost error, looking through cycle wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Cycle { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit status used by the CLI and the C ABI.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config { .. } | Error::Parse { .. } | Error::DegeneratePose(_) => 2,
            Error::OutOfRange { .. } => 2,
            Error::Numeric { .. } => 3,
            Error::SizeLimit { .. } => 4,
            Error::Io { .. } => 1,
            Error::Cycle { .. } => unreachable!("root() strips cycle wrappers"),
        }
    }
}
