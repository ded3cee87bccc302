//! One-vs-rest pipeline: per class, forest rules plus standardized features
//! feed a sparse relaxed logistic model. Prediction picks the class with the
//! highest sigmoid score.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{binarize_labels, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::evalx::{classification_metrics, confusion_counts, Metrics};
use crate::forest::{train_forest, ForestConfig};
use crate::rulegen::{extended_matrix, extract_rules, rule_matrix, Rule, RuleSet};
use crate::sr3opt::{fit_sr3, prune, refit_intercept, sigmoid, FitDiagnostics, HyperParams, OptimizerConfig, SparseLinearModel};

pub const FORMAT_VERSION: u64 = 1;

/// Seed for the forest of class `c`: splitmix64 of `seed + (c + 1) * golden`.
pub fn class_seed(seed: u64, class: usize) -> u64 {
    let mut z = seed.wrapping_add((class as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// The fitted model for one class against the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub class_id: usize,
    pub rules: RuleSet,
    /// Coefficients over `[standardized features | rule indicators]`, pruned.
    pub model: SparseLinearModel,
    pub standardizer: Standardizer,
    pub diagnostics: FitDiagnostics,
}

impl ClassModel {
    pub fn n_features(&self) -> usize {
        self.standardizer.n_features()
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got,
            });
        }
        Ok(())
    }

    /// `b0 + sum_j beta_j z_j(x)` computed from a raw feature vector.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        let d = self.n_features();
        let beta = &self.model.beta;
        let mut s = self.model.intercept;
        for j in 0..d {
            if beta[j] != 0.0 {
                s += beta[j] * (x[j] - self.standardizer.means[j]) / self.standardizer.stds[j];
            }
        }
        for (k, rule) in self.rules.rules.iter().enumerate() {
            if beta[d + k] != 0.0 && rule.matches(x) {
                s += beta[d + k];
            }
        }
        Ok(s)
    }

    /// Extended design matrix `[X_std | R]` for raw rows `x`.
    pub fn design_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_len(x.ncols())?;
        let r = rule_matrix(&self.rules, x)?;
        let x_std = self.standardizer.apply(x)?;
        Ok(extended_matrix(x_std.view(), r.view())?.z)
    }

    /// Scores of every row, via the design matrix.
    pub fn score_batch(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let z = self.design_matrix(x)?;
        let beta = ndarray::ArrayView1::from(&self.model.beta);
        Ok(z.dot(&beta).iter().map(|s| s + self.model.intercept).collect())
    }

    /// Rule columns with a nonzero coefficient.
    pub fn selected_rules(&self) -> impl Iterator<Item = (&Rule, f64)> {
        let d = self.n_features();
        self.rules
            .rules
            .iter()
            .enumerate()
            .filter(move |(k, _)| self.model.beta[d + k] != 0.0)
            .map(move |(k, r)| (r, self.model.beta[d + k]))
    }

    /// Raw feature columns with a nonzero coefficient.
    pub fn selected_features(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.model.beta[..self.n_features()]
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, b)| (j, *b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sr4FitClassifier {
    pub class_models: Vec<ClassModel>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub hyperparams: HyperParams,
    pub forest_config: ForestConfig,
    pub optimizer_config: OptimizerConfig,
    pub seed: u64,
}

/// Fits one model for class `c` against the rest.
///
/// With `hp.r_max == 0` no forest is grown and the model is a sparse
/// logistic regression on the standardized features.
pub fn fit_class_model(
    train: &Dataset,
    c: usize,
    hp: &HyperParams,
    fc: &ForestConfig,
    oc: &OptimizerConfig,
    seed: u64,
) -> Result<ClassModel> {
    let y = binarize_labels(train, c)?;
    if !y.iter().any(|&v| v > 0.0) {
        return Err(Error::Config("no positive rows in the training data".into()));
    }
    let x = train.features.view();
    let rules = if hp.r_max == 0 {
        RuleSet { rules: Vec::new(), source: c }
    } else {
        let cfg = ForestConfig {
            seed: class_seed(seed, c),
            ..fc.clone()
        };
        extract_rules(&train_forest(x, &y, &cfg), hp.r_max, c)
    };
    let r = rule_matrix(&rules, x)?;
    let standardizer = Standardizer::fit(x);
    let x_std = standardizer.apply(x)?;
    let z = extended_matrix(x_std.view(), r.view())?;
    let (fitted, diagnostics) = fit_sr3(z.z.view(), &y, hp, oc)?;
    let model = refit_intercept(z.z.view(), &y, &prune(&fitted))?;
    Ok(ClassModel {
        class_id: c,
        rules,
        model,
        standardizer,
        diagnostics,
    })
}

impl Sr4FitClassifier {
    pub fn fit(
        train: &Dataset,
        hp: &HyperParams,
        fc: &ForestConfig,
        oc: &OptimizerConfig,
        seed: u64,
    ) -> Result<Self> {
        hp.validate()?;
        fc.validate()?;
        oc.validate()?;
        let present = train.class_counts().iter().filter(|&&n| n > 0).count();
        if present < 2 {
            return Err(Error::SingleClass(present));
        }
        let class_models = (0..train.n_classes())
            .map(|c| fit_class_model(train, c, hp, fc, oc, seed).map_err(|e| Error::in_class(c, e)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            class_models,
            feature_names: train.feature_names.clone(),
            class_names: train.class_names.clone(),
            hyperparams: *hp,
            forest_config: fc.clone(),
            optimizer_config: *oc,
            seed,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_models.len()
    }

    pub fn score(&self, x: &[f64], class: usize) -> Result<f64> {
        self.class_models
            .get(class)
            .ok_or(Error::UnknownClass {
                class,
                n_classes: self.n_classes(),
            })?
            .score(x)
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.class_models.iter().map(|m| m.score(x)).collect()
    }

    /// Per-class sigmoid confidences; these need not sum to one.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.scores(x)?.into_iter().map(sigmoid).collect())
    }

    /// The per-class confidences rescaled to sum to one, for display.
    pub fn predict_proba_normalized(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.predict_proba(x)?;
        let total: f64 = p.iter().sum();
        Ok(p.into_iter().map(|v| v / total).collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    /// Per-class confidences for every row, shape `(n, classes)`.
    pub fn predict_proba_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes()));
        for (c, m) in self.class_models.iter().enumerate() {
            for (i, s) in m.score_batch(x)?.into_iter().enumerate() {
                out[[i, c]] = sigmoid(s);
            }
        }
        Ok(out)
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba_batch(x)?;
        Ok(p.rows().into_iter().map(|r| argmax(r.as_slice().expect("row-major"))).collect())
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<Metrics> {
        let pred = self.predict_batch(data.features.view())?;
        let counts = confusion_counts(&data.labels, &pred, self.n_classes().max(data.n_classes()))?;
        Ok(classification_metrics(&counts))
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        Ok(self.evaluate(data)?.accuracy)
    }

    /// Total number of rules with a nonzero coefficient.
    pub fn n_selected_rules(&self) -> usize {
        self.class_models.iter().map(|m| m.selected_rules().count()).sum()
    }

    /// Mean conditions per selected rule, 0 without selected rules.
    pub fn avg_selected_rule_len(&self) -> f64 {
        let lens: Vec<usize> = self
            .class_models
            .iter()
            .flat_map(|m| m.selected_rules().map(|(r, _)| r.len()))
            .collect();
        if lens.is_empty() {
            0.0
        } else {
            lens.iter().sum::<usize>() as f64 / lens.len() as f64
        }
    }

    /// Selected rule texts per class, thresholds rounded to `precision`.
    pub fn selected_rule_texts(&self, precision: usize) -> Vec<BTreeSet<String>> {
        self.class_models
            .iter()
            .map(|m| {
                m.selected_rules()
                    .map(|(r, _)| r.to_rounded_text(&self.feature_names, precision))
                    .collect()
            })
            .collect()
    }

    /// Per class, the selected features and rules ordered by `|beta|`.
    pub fn rule_report(&self) -> String {
        let mut out = String::new();
        for m in &self.class_models {
            let name = self.class_names.get(m.class_id).map_or("?", String::as_str);
            let mut terms: Vec<(String, f64)> = m
                .selected_features()
                .map(|(j, b)| (format!("feature {}", self.feature_names[j]), b))
                .collect();
            let n_features = terms.len();
            terms.extend(m.selected_rules().map(|(r, b)| (format!("rule {}", r.to_text(&self.feature_names)), b)));
            terms.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
            let _ = writeln!(
                out,
                "class {} ({}): {} terms ({} features, {} rules), intercept {}",
                m.class_id,
                name,
                terms.len(),
                n_features,
                terms.len() - n_features,
                m.model.intercept
            );
            for (text, b) in terms {
                let _ = writeln!(out, "  {b:+}  {text}");
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            hyperparams: self.hyperparams,
            forest_config: self.forest_config.clone(),
            optimizer_config: self.optimizer_config,
            seed: self.seed,
            class_models: self
                .class_models
                .iter()
                .map(|m| ClassModelFile {
                    class_id: m.class_id,
                    standardizer: m.standardizer.clone(),
                    rules: m.rules.rules.clone(),
                    beta: m.model.beta.clone(),
                    intercept: m.model.intercept,
                    w: m.model.w.clone(),
                    diagnostics: m.diagnostics,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let version = value
            .get("format_version")
            .ok_or_else(|| Error::Schema("missing format_version".into()))?
            .as_u64()
            .ok_or_else(|| Error::Schema("format_version must be a non-negative integer".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        file.into_classifier()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u64,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    hyperparams: HyperParams,
    #[serde(default)]
    forest_config: ForestConfig,
    #[serde(default)]
    optimizer_config: OptimizerConfig,
    #[serde(default)]
    seed: u64,
    class_models: Vec<ClassModelFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassModelFile {
    class_id: usize,
    standardizer: Standardizer,
    rules: Vec<Rule>,
    beta: Vec<f64>,
    intercept: f64,
    w: Vec<f64>,
    diagnostics: FitDiagnostics,
}

impl ModelFile {
    fn into_classifier(self) -> Result<Sr4FitClassifier> {
        let d = self.feature_names.len();
        if self.class_models.len() != self.class_names.len() {
            return Err(Error::Schema(format!(
                "{} class models for {} class names",
                self.class_models.len(),
                self.class_names.len()
            )));
        }
        let mut class_models = Vec::with_capacity(self.class_models.len());
        for (c, m) in self.class_models.into_iter().enumerate() {
            let p = d + m.rules.len();
            let bad = if m.class_id != c {
                Some(format!("class model {c} has class_id {}", m.class_id))
            } else if m.standardizer.means.len() != d || m.standardizer.stds.len() != d {
                Some(format!("class {c}: standardizer does not cover {d} features"))
            } else if m.beta.len() != p || m.w.len() != p {
                Some(format!("class {c}: expected {p} coefficients"))
            } else if m.rules.iter().any(|r| r.is_empty() || r.max_feature().is_some_and(|f| f >= d)) {
                Some(format!("class {c}: rule is empty or references an unknown feature"))
            } else {
                None
            };
            if let Some(msg) = bad {
                return Err(Error::Schema(msg));
            }
            let support = (0..p).filter(|&j| m.w[j] != 0.0).collect();
            class_models.push(ClassModel {
                class_id: c,
                rules: RuleSet { rules: m.rules, source: c },
                model: SparseLinearModel {
                    beta: m.beta,
                    intercept: m.intercept,
                    w: m.w,
                    support,
                    objective_trace: Vec::new(),
                },
                standardizer: m.standardizer,
                diagnostics: m.diagnostics,
            });
        }
        Ok(Sr4FitClassifier {
            class_models,
            feature_names: self.feature_names,
            class_names: self.class_names,
            hyperparams: self.hyperparams,
            forest_config: self.forest_config,
            optimizer_config: self.optimizer_config,
            seed: self.seed,
        })
    }
}
