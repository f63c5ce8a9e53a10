use thiserror::Error;

#[derive(Debug, Error)]
pub enum NestError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("item {item} out of range for n = {n}")]
    ItemOutOfRange { item: usize, n: usize },

    #[error("empty assortment")]
    EmptyAssortment,

    #[error("assortment `{0}` has no observations")]
    NoObservations(String),

    #[error("item {item} has zero control probability")]
    ZeroControlProbability { item: usize },

    #[error("zero pooled denominator in z-statistic for items ({i}, {j}) on `{label}`")]
    ZeroDenominator { i: usize, j: usize, label: String },

    #[error("coefficient matrix is near-singular (|det| = {det:.3e}) for nest {nest}")]
    Singular { nest: usize, det: f64 },

    #[error("anchor dissimilarity disagrees across systems: {min} vs {max}")]
    AnchorDisagreement { min: f64, max: f64 },

    #[error("recovered dissimilarity {value} of nest {nest} lies outside [0, 1]")]
    DissimilarityOutOfRange { nest: usize, value: f64 },

    #[error("no assortment pair found for nests {0} and {1}")]
    NoAssortmentPair(usize, usize),

    #[error("design is not slice-generated")]
    NotSliceDesign,

    #[error("assortment `{0}` was not observed")]
    UnobservedAssortment(String),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, NestError>;
