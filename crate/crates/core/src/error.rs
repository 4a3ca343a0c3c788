use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected one of [{}], found {found}", expected.join(", "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("variable {0} is not valid in dimension {1}")]
    BadVariable(String, usize),

    #[error("Newton iteration did not converge at z = {at}")]
    NoConvergence { at: String },

    #[error("point lies outside the domain: {0}")]
    OutsideDomain(String),

    #[error("point is too close to the exceptional locus X = {{w = 0}}: |w| = {0:e}")]
    NearExceptional(f64),

    #[error("degenerate Levi form: smallest |eigenvalue| = {0:e}")]
    DegenerateLevi(f64),

    #[error("invalid hypersurface: {0}")]
    InvalidSurface(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("residual {residual:e} exceeds tolerance {tolerance:e} in {context}")]
    Residual {
        context: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("empty intersection: {0}")]
    EmptyIntersection(String),

    #[error("continuation failed at chain index {index}: {reason}")]
    Continuation { index: usize, reason: String },

    #[error("no Segre chain found within depth {max_depth}; deepest cloud reached depth {reached}")]
    ChainNotFound { max_depth: usize, reached: usize },

    #[error("too many Segre-graph failures: {failed} of {attempted}")]
    SamplingFailed { failed: usize, attempted: usize },

    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ambiguous eigenvalue clustering: gap {0:e}")]
    AmbiguousClustering(f64),

    #[error("format error: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
