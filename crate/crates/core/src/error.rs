use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown field id {0}")]
    UnknownField(usize),
    #[error("index {index} out of range for field {field} (cardinality {cardinality})")]
    IndexOutOfRange {
        field: usize,
        index: u32,
        cardinality: u32,
    },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("split ratios must be positive and sum to 1 (sum = {0})")]
    InvalidRatios(f64),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label values must be 0 or 1")]
    NonBinaryLabel,
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("duplicate combination {0}")]
    DuplicateCombination(String),
    #[error("dataset is missing field {0}")]
    MissingField(String),
    #[error("size guard violated: {0}")]
    SizeGuard(String),
    #[error("field {0} is not in the feature window")]
    NotInWindow(usize),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}
