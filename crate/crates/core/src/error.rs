use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state {0} is absorbed")]
    Absorbed(String),

    #[error("measure is not normalized (total mass {0})")]
    NotNormalized(f64),

    #[error("measures are binned on different grids")]
    BinningMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(
        "slice |n| = {k} holds {size} states, over the enumeration budget of {budget}; \
         use the Lotka-Volterra closed-form bound path"
    )]
    EnumerationBudget { k: u64, size: f64, budget: u64 },

    #[error("no admissible beta up to {beta_max}; binding k = {binding_k}")]
    NoAdmissibleBeta { beta_max: f64, binding_k: u64 },

    #[error("power iteration did not converge in {0} iterations")]
    NoConvergence(usize),

    #[error("truncation is reducible: {0}")]
    Reducible(String),

    #[error("uniformization rate {rate} exceeds bound {bound}")]
    UniformizationRate { rate: f64, bound: f64 },

    #[error("insufficient decay resolved: fit window holds {0} points (need 5)")]
    InsufficientDecay(usize),

    #[error("all particles absorbed at t = {0}; restart with a smaller dt")]
    TotalAbsorption(f64),

    #[error("no admissible g interpolant: {0}")]
    NoAdmissibleG(String),

    #[error("sample does not escape every O_n: {0}")]
    NotEscaping(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
