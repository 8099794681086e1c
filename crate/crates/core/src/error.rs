use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge would create a directed cycle: {}", path.join(" -> "))]
    Cycle { path: Vec<String> },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("duplicate node `{0}`")]
    DuplicateNode(String),

    #[error("invalid node name `{0}`: expected a non-empty identifier of [A-Za-z0-9_]")]
    InvalidName(String),

    #[error("edge {parent} -> {child} already exists")]
    DuplicateEdge { parent: String, child: String },

    #[error("no edge {parent} -> {child}")]
    UnknownEdge { parent: String, child: String },

    #[error("self-loop on `{0}`")]
    SelfLoop(String),

    #[error("belief score {0} out of range 0..=3")]
    BeliefOutOfRange(i64),

    #[error("belief 0 marks a relation as impossible; remove the edge instead")]
    ZeroBelief,

    #[error("CSV parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column `{column}`: `{value}`")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("need at least {needed} rows, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("column `{column}` has length {len}, expected {expected}")]
    RaggedColumn {
        column: String,
        len: usize,
        expected: usize,
    },

    #[error("non-finite value in column `{0}`")]
    NonFinite(String),

    #[error("column `{0}` has zero variance")]
    DegenerateColumn(String),

    #[error("design matrix for `{child}` is rank deficient (collinear parents: {})", parents.join(", "))]
    SingularDesign { child: String, parents: Vec<String> },

    #[error("sample covariance matrix is singular")]
    SingularSampleCov,

    #[error("model-induced covariance matrix is singular")]
    SingularInducedCov,

    #[error("fit was computed for graph version {fit}, graph is at version {graph}")]
    VersionMismatch { fit: u64, graph: u64 },

    #[error("record `{0}` has no raw p-value")]
    MissingRawP(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("iteration history is append-only: {0}")]
    History(String),

    #[error("unknown iteration {0}")]
    UnknownIteration(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
