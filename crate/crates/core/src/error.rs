use std::path::PathBuf;

/// Errors produced anywhere in the reconstruction chain.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("duplicate hit id {id} at lines {first} and {second}")]
    DuplicateHit { id: u64, first: usize, second: usize },

    #[error("hit id {0} referenced but not present")]
    UnknownHit(u64),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("{stage} failed{}: {source}", location.as_ref().map(|l| format!(" ({l})")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        location: Option<String>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str, location: Option<String>) -> Self {
        Error::Stage { stage, location, source: Box::new(self) }
    }
}

/// Attach a pipeline stage name (and optional sector/sub-graph location) to an error.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
    fn stage_at(self, stage: &'static str, location: impl FnOnce() -> String) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage, None))
    }

    fn stage_at(self, stage: &'static str, location: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.in_stage(stage, Some(location())))
    }
}
