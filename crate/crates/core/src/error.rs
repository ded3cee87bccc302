use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("target column `{0}` not found in header")]
    MissingTarget(String),

    #[error("non-numeric value `{value}` at data row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("no data rows")]
    EmptyData,

    #[error("dataset has no feature columns")]
    NoFeatures,

    #[error("dataset of {n} rows is too small to split with test fraction {fraction}")]
    TooSmallToSplit { n: usize, fraction: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown class id {class} (dataset has {n_classes} classes)")]
    UnknownClass { class: usize, n_classes: usize },

    #[error("empty node: impurity undefined")]
    EmptyNode,

    #[error("a rule needs at least one condition")]
    EmptyRule,

    #[error("unsatisfiable conjunction on feature {feature}: x > {gt} and x <= {le}")]
    UnsatisfiableRule { feature: usize, gt: f64, le: f64 },

    #[error("rule references feature {feature} but input has {d} features")]
    FeatureOutOfRange { feature: usize, d: usize },

    #[error("non-finite objective at outer iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("training data needs at least two classes, found {0}")]
    SingleClass(usize),

    #[error("class {class}: {source}")]
    InClass {
        class: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {trial}: {source}")]
    InTrial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("feature names do not match the model: expected {expected:?}, got {got:?}")]
    FeatureNameMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },

    #[error("model file schema error: {0}")]
    Schema(String),

    #[error("unsupported model format_version {found} (this build reads version {supported})")]
    FormatVersion { found: u64, supported: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_class(class: usize, source: Error) -> Self {
        Error::InClass {
            class,
            source: Box::new(source),
        }
    }

    pub(crate) fn in_trial(trial: usize, source: Error) -> Self {
        Error::InTrial {
            trial,
            source: Box::new(source),
        }
    }
}
