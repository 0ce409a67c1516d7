use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("design is rank deficient (smallest |R_jj| = {min_diag:e}, largest = {max_diag:e})")]
    RankDeficient { min_diag: f64, max_diag: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("class P(n={n}, k={k}) has {count} members, above the limit {limit}")]
    ClassTooLarge {
        n: usize,
        k: usize,
        count: u128,
        limit: u128,
    },

    #[error("class size does not fit in 128 bits")]
    Overflow,

    #[error("no permutation in P(n={n}, k={k}) moves exactly {distance} indices")]
    InvalidDistance { n: usize, k: usize, distance: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("penalties must be non-negative (lam1 = {lam1}, lam2 = {lam2})")]
    NegativePenalty { lam1: f64, lam2: f64 },

    #[error("candidate set is empty")]
    EmptySet,

    #[error("confidence region has no pieces")]
    EmptyRegion,

    #[error("oracle recovery needs n - 2k >= p (n = {n}, k = {k}, p = {p})")]
    IdentifiabilityViolated { n: usize, k: usize, p: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("cannot pair indices under the window constraint: {0}")]
    InfeasibleWindow(String),

    #[error("work estimate {estimate:.3e} exceeds the budget of {budget:.3e} units")]
    BudgetExceeded { estimate: f64, budget: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("column `{0}` has (near) zero variance")]
    DegenerateColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
