use thiserror::Error;

/// Errors surfaced by the solvers, data structures and file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpmError {
    #[error("infeasible k: requested {k}, but at most {max} pairs exist")]
    InfeasibleK { k: usize, max: usize },
    #[error("invalid cost parameters p={p}, q={q} (both must be >= 1)")]
    InvalidParams { p: u32, q: u32 },
    #[error("non-finite coordinate on point {id}")]
    NonFinite { id: u32 },
    #[error("point ids must be dense and unique: {0}")]
    BadIds(String),
    #[error("duplicate id {id} on side {side}")]
    DuplicateId { side: &'static str, id: u32 },
    #[error("id {id} not present on side {side}")]
    MissingId { side: &'static str, id: u32 },
    #[error("stale or invalid checkpoint token")]
    StaleCheckpoint,
    #[error("malformed augmenting path: {0}")]
    MalformedPath(String),
    #[error("residual arc {0} is not present in the residual network")]
    NotResidual(String),
    #[error("supplies do not balance: supply {supply}, demand {demand}")]
    Unbalanced { supply: i64, demand: i64 },
    #[error("invalid supply on point {id}: {msg}")]
    BadSupply { id: u32, msg: String },
    #[error("instance too large for the exhaustive oracle ({r}x{n}, limit {limit})")]
    TooLarge { r: usize, n: usize, limit: usize },
    #[error("invalid epsilon {0}; must be positive and finite")]
    InvalidEpsilon(f64),
    #[error("conservation violated during uncontraction: {0}")]
    Conservation(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0} scales exceed the supported potential range")]
    TooManyScales(usize),
    #[error("solver invariant violated: {0}")]
    Internal(String),
}

impl From<std::io::Error> for GpmError {
    fn from(e: std::io::Error) -> Self {
        GpmError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GpmError>;
