use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: x has {x} columns, y has {y}")]
    DimensionMismatch { x: usize, y: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },

    #[error("point cloud must have at least one row and one column (got {n}x{d})")]
    EmptyCloud { n: usize, d: usize },

    #[error("graph on {nodes} nodes is too small for a {ell}-MST (need more than {ell} nodes)")]
    GraphTooSmall { nodes: usize, ell: usize },

    #[error("complete graph became disconnected while building spanning tree {tree} of the l-MST")]
    DisconnectedAfterExclusion { tree: usize },

    #[error("both samples must be non-empty (n = {n}, m = {m})")]
    SingleSample { n: usize, m: usize },

    #[error("permutation covariance is numerically singular (condition number {condition:.3e})")]
    SingularCovariance { condition: f64 },

    #[error("exact enumeration needs {count} label assignments (limit {limit})")]
    EnumerationTooLarge { count: f64, limit: u64 },

    #[error("at least {min} permutation draws are required (got {got})")]
    InsufficientDraws { got: usize, min: usize },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { got: usize, needed: usize },

    #[error("k-means left an empty cluster after {restarts} restarts (k = {k})")]
    EmptyClusterUnrecoverable { k: usize, restarts: usize },

    #[error(
        "only {feasible} of {wanted} bootstrap rounds were feasible after {attempts} attempts; \
         m = {m} is too large relative to the smallest estimated cluster ({smallest} rows)"
    )]
    TooManyInfeasibleRounds {
        feasible: usize,
        wanted: usize,
        attempts: usize,
        m: usize,
        smallest: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("adaptive quadrature did not reach tolerance {tol:e} (estimated error {err:e})")]
    QuadratureNonconvergent { tol: f64, err: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid spec at `{path}`: {msg}")]
    InvalidSpec { path: String, msg: String },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("selection is empty")]
    EmptySelection,

    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Parse error with a 1-based line and column taken from the TOML span.
    pub fn toml(src: &str, e: toml::de::Error) -> Self {
        let (line, column) = e
            .span()
            .map(|span| {
                let before = &src[..span.start.min(src.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
                (line, column)
            })
            .unwrap_or((0, 0));
        Error::Parse {
            line,
            column,
            msg: e.message().to_string(),
        }
    }

    pub(crate) fn spec(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::InvalidSpec {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
