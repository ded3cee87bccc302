//! Decision rules read off forest paths, their 0/1 indicator matrix, and the
//! extended design matrix `[X_std | R]`.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt::Write as _;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, TreeNode};

/// Decimals used when deciding whether two extracted rules are the same.
pub const DEDUP_PRECISION: usize = 6;
/// Coarser decimals used to match rules across trials.
pub const STABILITY_PRECISION: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    /// `x <= threshold`
    Le,
    /// `x > threshold`
    Gt,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Le => "<=",
            Op::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub op: Op,
    pub threshold: f64,
}

impl Condition {
    pub fn le(feature: usize, threshold: f64) -> Self {
        Self {
            feature,
            op: Op::Le,
            threshold,
        }
    }

    pub fn gt(feature: usize, threshold: f64) -> Self {
        Self {
            feature,
            op: Op::Gt,
            threshold,
        }
    }

    #[inline]
    pub fn holds(&self, value: f64) -> bool {
        match self.op {
            Op::Le => value <= self.threshold,
            Op::Gt => value > self.threshold,
        }
    }
}

/// A conjunction of conditions in canonical form: at most one `<=` and one
/// `>` per feature, sorted by feature with `<=` first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// Highest feature index referenced, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.conditions.iter().map(|c| c.feature).max()
    }

    /// Unchecked evaluation; callers guarantee `x` covers every feature.
    #[inline]
    pub fn matches(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(x[c.feature]))
    }

    /// Identity string with thresholds rounded to `precision` decimals.
    pub fn key(&self, precision: usize) -> String {
        self.render(None, Some(precision))
    }

    /// `name <= value and name > value`, thresholds at full precision.
    pub fn to_text(&self, feature_names: &[String]) -> String {
        self.render(Some(feature_names), None)
    }

    /// Named text with thresholds rounded to `precision` decimals.
    pub fn to_rounded_text(&self, feature_names: &[String], precision: usize) -> String {
        self.render(Some(feature_names), Some(precision))
    }

    fn render(&self, names: Option<&[String]>, precision: Option<usize>) -> String {
        let mut out = String::new();
        for (i, c) in self.conditions.iter().enumerate() {
            if i > 0 {
                out.push_str(" and ");
            }
            match names.and_then(|n| n.get(c.feature)) {
                Some(name) => out.push_str(name),
                None => {
                    let _ = write!(out, "x{}", c.feature);
                }
            }
            let _ = match precision {
                Some(p) => write!(out, " {} {:.*}", c.op.symbol(), p, round_to(c.threshold, p)),
                None => write!(out, " {} {}", c.op.symbol(), c.threshold),
            };
        }
        out
    }
}

fn round_to(v: f64, decimals: usize) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let r = (v * scale).round() / scale;
    // fold -0.0 into 0.0 so keys don't depend on the sign of zero
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Collapses a path's conditions into canonical form.
///
/// Repeated `<=` on a feature keep the smallest threshold, repeated `>` the
/// largest. Fails when a feature's interval is empty.
pub fn canonicalize(conditions: &[Condition]) -> Result<Rule> {
    if conditions.is_empty() {
        return Err(Error::EmptyRule);
    }
    let mut bounds: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for c in conditions {
        let entry = bounds.entry(c.feature).or_default();
        match c.op {
            Op::Le => entry.0 = Some(entry.0.map_or(c.threshold, |t| t.min(c.threshold))),
            Op::Gt => entry.1 = Some(entry.1.map_or(c.threshold, |t| t.max(c.threshold))),
        }
    }
    let mut out = Vec::with_capacity(conditions.len());
    for (feature, (le, gt)) in bounds {
        if let (Some(le), Some(gt)) = (le, gt) {
            if gt >= le {
                return Err(Error::UnsatisfiableRule { feature, gt, le });
            }
        }
        if let Some(t) = le {
            out.push(Condition::le(feature, t));
        }
        if let Some(t) = gt {
            out.push(Condition::gt(feature, t));
        }
    }
    Ok(Rule { conditions: out })
}

/// 1 when `x` satisfies every condition of `rule`, else 0.
pub fn evaluate_rule(rule: &Rule, x: &[f64]) -> Result<u8> {
    if let Some(f) = rule.max_feature().filter(|&f| f >= x.len()) {
        return Err(Error::FeatureOutOfRange {
            feature: f,
            d: x.len(),
        });
    }
    Ok(rule.matches(x) as u8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    /// Class whose one-vs-rest forest produced the rules.
    pub source: usize,
}

impl RuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Raw condition lists for every non-root node of `tree`, breadth-first.
pub fn path_conditions(tree: &TreeNode) -> Vec<Vec<Condition>> {
    let mut out = Vec::new();
    let mut queue: VecDeque<(&TreeNode, Vec<Condition>)> = VecDeque::new();
    queue.push_back((tree, Vec::new()));
    while let Some((node, path)) = queue.pop_front() {
        if let TreeNode::Internal {
            feature,
            threshold,
            left,
            right,
        } = node
        {
            let mut lp = path.clone();
            lp.push(Condition::le(*feature, *threshold));
            let mut rp = path;
            rp.push(Condition::gt(*feature, *threshold));
            out.push(lp.clone());
            out.push(rp.clone());
            queue.push_back((left, lp));
            queue.push_back((right, rp));
        }
    }
    out
}

/// Distinct canonical rules from all root-to-node paths, in tree order then
/// breadth-first order, stopping once `r_max` rules are kept.
///
/// Paths whose conditions cannot all hold (only possible in hand-built
/// trees) are skipped.
pub fn extract_rules(forest: &Forest, r_max: usize, source: usize) -> RuleSet {
    let mut seen = HashSet::new();
    let mut rules = Vec::new();
    'trees: for tree in &forest.trees {
        for path in path_conditions(tree) {
            if rules.len() >= r_max {
                break 'trees;
            }
            let Ok(rule) = canonicalize(&path) else {
                continue;
            };
            if seen.insert(rule.key(DEDUP_PRECISION)) {
                rules.push(rule);
            }
        }
    }
    RuleSet { rules, source }
}

/// Indicator matrix `R[i, j] = rule_j(x_i)` on original feature values.
pub fn rule_matrix(rules: &RuleSet, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let d = x.ncols();
    if let Some(f) = rules.rules.iter().filter_map(Rule::max_feature).find(|&f| f >= d) {
        return Err(Error::FeatureOutOfRange { feature: f, d });
    }
    let mut r = Array2::zeros((x.nrows(), rules.len()));
    for (i, row) in x.rows().into_iter().enumerate() {
        let row = row.to_vec();
        for (j, rule) in rules.rules.iter().enumerate() {
            if rule.matches(&row) {
                r[[i, j]] = 1.0;
            }
        }
    }
    Ok(r)
}

/// `Z = [X_std | R]`: `d` standardized raw columns followed by `m` rule columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMatrix {
    pub z: Array2<f64>,
    pub d: usize,
    pub m: usize,
}

pub fn extended_matrix(x_std: ArrayView2<f64>, r: ArrayView2<f64>) -> Result<ExtendedMatrix> {
    if x_std.nrows() != r.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x_std.nrows(),
            got: r.nrows(),
        });
    }
    let z = concatenate(Axis(1), &[x_std, r]).expect("row counts checked");
    Ok(ExtendedMatrix {
        z,
        d: x_std.ncols(),
        m: r.ncols(),
    })
}
