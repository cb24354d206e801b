use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("reward {reward} is not on the reward grid")]
    OffGridReward { reward: f64 },

    #[error("type {type_index} has expected departure {departure:e}, below the floor")]
    DegenerateSupply { type_index: usize, departure: f64 },

    #[error("oracle grid too large: {0}")]
    TooLarge(String),

    #[error("infeasible input: {0}")]
    InfeasibleInput(String),

    #[error("no interlacing pair in the support")]
    NotFound,

    #[error("support has {0} points; expected at most two")]
    UnsupportedSupport(usize),

    #[error("invalid moments: {0}")]
    InvalidMoments(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cyclic policy does not mix for type {type_index}")]
    NonMixing { type_index: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error("marginal surplus derivative vanishes at u = {u}")]
    DerivativeVanishes { u: f64 },

    #[error("grid mismatch: {left} vs {right} points")]
    GridMismatch { left: usize, right: usize },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
