//! Interpretable rule-ensemble classification.
//!
//! Per class, a one-vs-rest random forest proposes decision rules; the rules'
//! 0/1 indicators are appended to the standardized raw features, and a sparse
//! relaxed logistic model is fitted over the combined columns by alternating a
//! descent step on the predictive weights with a soft-threshold step on the
//! sparse companion vector. Columns whose sparse weight ends at zero are
//! pruned, and prediction takes the class with the highest sigmoid score.
//!
//! - [`dataset`]: CSV loading, stratified splits, standardization
//! - [`forest`]: CART trees and bootstrap forests
//! - [`rulegen`]: rule extraction, canonical form, indicator matrices
//! - [`sr3opt`]: the relaxed objective and its alternating solver
//! - [`classifier`]: the one-vs-rest pipeline, model files, rule reports
//! - [`evalx`]: metrics, rule stability, interpretability score, t-tests
//! - [`experiment`]: multi-trial runs and grid search

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod evalx;
pub mod experiment;
pub mod forest;
pub mod rulegen;
pub mod sr3opt;

pub use classifier::{ClassModel, Sr4FitClassifier};
pub use dataset::{Dataset, SplitSpec, Standardizer};
pub use error::{Error, Result};
pub use forest::{Forest, ForestConfig, TreeNode};
pub use rulegen::{Condition, Op, Rule, RuleSet};
pub use sr3opt::{FitDiagnostics, HyperParams, OptimizerConfig, SparseLinearModel};
