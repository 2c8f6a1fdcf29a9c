use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("could not place {what} after {attempts} attempts")]
    Placement { what: String, attempts: usize },

    #[error("receiver point {point} lies inside scatterer {scatterer_id}")]
    RxInsideScatterer { point: String, scatterer_id: u32 },

    #[error("paths were traced for a different link ({0})")]
    LinkMismatch(String),

    #[error("reference signal has zero energy")]
    ZeroEnergy,

    #[error("allocation violates the partition constraint at t={t}, r={r}")]
    PartitionViolation { t: usize, r: usize },

    #[error(
        "instance too large for exhaustive search: {assignments} assignments exceed limit {limit}"
    )]
    InstanceTooLarge { assignments: f64, limit: f64 },

    #[error("k={k} exceeds training set size {n}")]
    TooFewNeighbors { k: usize, n: usize },

    #[error("beam weights must have unit norm (got {0})")]
    NonUnitWeights(f64),

    #[error("unknown task: {0}")]
    UnknownTask(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
