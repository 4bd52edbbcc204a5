use thiserror::Error;

pub type Result<T, E = LireError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LireError {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("invalid forest: {0}")]
    InvalidForest(String),

    #[error("non-normalized leaf: tree {tree}, leaf {leaf} sums to {sum}")]
    NonNormalizedLeaf { tree: usize, leaf: usize, sum: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid region key: {0}")]
    InvalidKey(String),

    #[error("ill-conditioned constraint system: {0}")]
    IllConditioned(String),

    #[error("constraint system is infeasible")]
    Infeasible,

    #[error("no live target region")]
    NoLiveTarget,

    #[error("all target regions are infeasible under the feature constraints")]
    AllTargetsInfeasible,

    #[error("no dataset row satisfies the target and feature constraints")]
    NoQualifyingRow,

    #[error("target does not match the model task: {0}")]
    TargetMismatch(String),

    #[error("region enumeration was capped at step {step}; exact search refused")]
    Capped { step: usize },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt index: {0}")]
    CorruptIndex(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
