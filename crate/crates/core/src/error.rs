use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error category, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter domain violation at observation {index}: {detail}")]
    Domain { index: usize, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("df target {target} outside attainable range ({min}, {max})")]
    DfOutOfRange { target: f64, min: f64, max: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate direction: fitted base-learner is identically zero")]
    DegenerateDirection,

    #[error("no interior minimum along the direction up to step length {0}")]
    UnboundedDirection(f64),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold}: {source}")]
    InFold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run {run}: {source}")]
    InRun {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(index: usize, detail: impl Into<String>) -> Self {
        Error::Domain {
            index,
            detail: detail.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::DfOutOfRange { .. } => ErrorKind::Config,
            Error::Data(_) | Error::Domain { .. } | Error::Io(_) => ErrorKind::Data,
            Error::Singular(_)
            | Error::DegenerateDirection
            | Error::UnboundedDirection(_)
            | Error::Numeric(_) => ErrorKind::Numeric,
            Error::AtIteration { source, .. }
            | Error::InFold { source, .. }
            | Error::InRun { source, .. } => source.kind(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::InFold {
            fold,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_run(self, run: usize) -> Self {
        Error::InRun {
            run,
            source: Box::new(self),
        }
    }
}
