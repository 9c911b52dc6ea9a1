use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label {id} has dim {left} in one tensor and {right} in another")]
    DimMismatch { id: u32, left: usize, right: usize },
    #[error("label {0} is not carried by the tensor")]
    UnknownLabel(u32),
    #[error("zero entry raised to negative power {0}")]
    ZeroToNegativePower(f64),
    #[error("normalizer is numerically zero")]
    DegenerateNormalizer,
    #[error("tensor {0} is not covered by any parent region")]
    CoverageError(usize),
    #[error("preset {0} needs geometry metadata the network does not carry")]
    GeometryMissing(String),
    #[error("messages do not match the region graph: {0}")]
    LabelMismatch(String),
    #[error("non-finite entry produced while updating child region {0}")]
    NonFiniteEntry(usize),
    #[error("state is not a fixed point (metric {0:e})")]
    NotAFixedPoint(f64),
    #[error("index {0} of the subset is not covered by any region inside it")]
    UncoveredIndex(u32),
    #[error("contraction needs an intermediate of {needed} entries, budget is {budget}")]
    BudgetExceeded { needed: f64, budget: f64 },
    #[error("quadrature did not reach tolerance")]
    QuadratureNonConvergence,
    #[error("argument outside the domain: {0}")]
    OutsideDomain(String),
    #[error("no records in group {0}")]
    EmptyGroup(String),
    #[error("child region {0} has c_b + |P(b)| = 0")]
    SingularUpdate(usize),
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
