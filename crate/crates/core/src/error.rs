use thiserror::Error;

use crate::subset::Subset;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} outside supported range 1..=30")]
    InvalidDimension(usize),
    #[error("invalid subset: {0}")]
    InvalidSubset(String),
    #[error("cardinality cap {cap} exceeds dimension {d}")]
    InvalidCap { cap: usize, d: usize },
    #[error("dimension {d} exceeds the exact-mode limit {limit}; use a cardinality cap")]
    DimensionTooLarge { d: usize, limit: usize },

    #[error("probability table length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("negative probability {value} at configuration {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("marginal q_{index} = {q} must lie strictly inside (0, 1)")]
    DegenerateMarginal { index: usize, q: f64 },
    #[error("correlation {0} outside [0, 1)")]
    InvalidCorrelation(f64),
    #[error("rho = {0} gives an FGM parameter 16*rho - 4 outside [-1, 1]")]
    OutOfFgmRange(f64),

    #[error("zero marginal probability for subset {subset} at configuration {config}")]
    ZeroMarginal { subset: Subset, config: usize },
    #[error("distribution does not have full support ({zero_cells} zero cells)")]
    NotFullSupport { zero_cells: usize },
    #[error("Gram matrix is ill-conditioned: pivot {pivot:e} at position {position}")]
    IllConditioned { position: usize, pivot: f64 },
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("support collapsed: {0}")]
    CollapsedSupport(String),
    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
    #[error("subset {0} is not part of the decomposition order")]
    NotInOrder(Subset),
    #[error("configuration {0} is outside the support")]
    OffSupport(usize),

    #[error("model expects {expected} inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("expression parse error at offset {offset}: {message}")]
    ExpressionParse { offset: usize, message: String },

    #[error("output variance {0:e} is numerically zero")]
    ZeroVariance(f64),

    #[error("need at least {required} samples, got {n}")]
    InsufficientSamples { n: usize, required: usize },
    #[error("sample {row} hits a zero-probability pattern for subset {subset}")]
    OffSupportSample { row: usize, subset: Subset },
    #[error("eps = {eps} outside the validity window [0, {max}]")]
    EpsOutOfRange { eps: f64, max: f64 },
    #[error("confidence level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("samples carry no outputs and no model was given")]
    MissingOutputs,

    #[error("column {0:?} not found")]
    MissingColumn(String),
    #[error("rule {rule:?} produced a non-binary value {value:?}")]
    NonBinaryPredicateResult { rule: String, value: String },
    #[error("invalid binarization spec: {0}")]
    InvalidSpec(String),
    #[error("dataset required but not provided")]
    DatasetMissing,
    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "InvalidDimension",
            Error::InvalidSubset(_) => "InvalidSubset",
            Error::InvalidCap { .. } => "InvalidCap",
            Error::DimensionTooLarge { .. } => "DimensionTooLarge",
            Error::NotPowerOfTwo(_) => "NotPowerOfTwo",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::NegativeProbability { .. } => "NegativeProbability",
            Error::DegenerateMarginal { .. } => "DegenerateMarginal",
            Error::InvalidCorrelation(_) => "InvalidCorrelation",
            Error::OutOfFgmRange(_) => "OutOfFGMRange",
            Error::ZeroMarginal { .. } => "ZeroMarginal",
            Error::NotFullSupport { .. } => "NotFullSupport",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::ZeroNorm => "ZeroNorm",
            Error::CollapsedSupport(_) => "CollapsedSupport",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::NotInOrder(_) => "NotInOrder",
            Error::OffSupport(_) => "OffSupport",
            Error::ArityMismatch { .. } => "ArityMismatch",
            Error::InvalidModel(_) => "InvalidModel",
            Error::ExpressionParse { .. } => "ExpressionParse",
            Error::ZeroVariance(_) => "ZeroVariance",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::OffSupportSample { .. } => "OffSupportSample",
            Error::EpsOutOfRange { .. } => "EpsOutOfRange",
            Error::InvalidLevel(_) => "InvalidLevel",
            Error::MissingOutputs => "MissingOutputs",
            Error::MissingColumn(_) => "MissingColumn",
            Error::NonBinaryPredicateResult { .. } => "NonBinaryPredicateResult",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::DatasetMissing => "DatasetMissing",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}
