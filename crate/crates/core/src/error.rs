use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("invalid probability {0}: expected 0 <= p < 1")]
    InvalidProbability(f64),
    #[error("batch normalization needs at least 2 rows in train mode, got {rows}")]
    InsufficientBatch { rows: usize },
    #[error("gradient requested for a non-scalar node of shape {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("invalid hyperparameter {name} = {value}")]
    InvalidHyperparameter { name: &'static str, value: f64 },
    #[error("invalid cross-view pair: source {source_view} and target {target_view} must differ")]
    InvalidPair {
        source_view: usize,
        target_view: usize,
    },
    #[error("subject {subject} has no observed view")]
    InvalidSubject { subject: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("non-finite value in loss term {term}")]
    NonFinite { term: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset already carries missing views; missingness is applied once")]
    AlreadyMasked,
    #[error("class {class} has {count} subjects; stratified split needs at least 2")]
    Stratification { class: usize, count: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("binary metric requested on labels outside {{0, 1}}")]
    NonBinary,
    #[error("AUC is undefined when only one class is present")]
    UndefinedAuc,
    #[error("invalid view subset: {0}")]
    InvalidSubset(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
