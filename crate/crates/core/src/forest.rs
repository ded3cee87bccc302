//! CART trees and bootstrap forests trained on one-vs-rest labels.
//!
//! The forest only generates candidate rules; its votes are never used for
//! classification. Trees are grown on the original (unstandardized) features
//! so that split thresholds stay in the data's units.

use ndarray::ArrayView2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum impurity decrease treated as a real improvement.
const MIN_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left, the rest go right.
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        pos_frac: f64,
        count: usize,
    },
}

impl TreeNode {
    pub fn leaf(pos_frac: f64, count: usize) -> Self {
        TreeNode::Leaf { pos_frac, count }
    }

    pub fn split(feature: usize, threshold: f64, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Internal {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Length of the longest root-to-leaf path (a lone leaf has depth 0).
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    /// Positive fraction of the leaf that `x` lands in.
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { pos_frac, .. } => return *pos_frac,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features sampled per split; `None` means `ceil(sqrt(d))`. Values above
    /// `d` are clamped to `d`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 25,
            max_depth: 4,
            min_leaf: 5,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::Config(
                "n_trees, max_depth and min_leaf must be positive".into(),
            ));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::Config("features_per_split must be positive".into()));
        }
        Ok(())
    }

    pub fn resolved_features_per_split(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub config: ForestConfig,
}

/// `1 - p^2 - (1-p)^2` for a node with `pos` positives and `neg` negatives.
pub fn gini_impurity(pos: usize, neg: usize) -> Result<f64> {
    let n = pos + neg;
    if n == 0 {
        return Err(Error::EmptyNode);
    }
    Ok(gini(pos as f64, n as f64))
}

#[inline]
fn gini(pos: f64, n: f64) -> f64 {
    let p = pos / n;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Best Gini split of `rows` over `candidate_features`, or `None` when the
/// node is pure or no threshold leaves `min_leaf` rows on each side.
///
/// Thresholds are midpoints between consecutive distinct values. Ties go to
/// the lowest feature index, then the lowest threshold. An impure node may
/// take a zero-decrease split (XOR-like layouts need one to become separable
/// one level down).
pub fn best_split(
    rows: &[usize],
    x: ArrayView2<f64>,
    y: &[f64],
    candidate_features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = rows.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let total_pos = rows.iter().filter(|&&r| y[r] > 0.0).count() as f64;
    let parent = gini(total_pos, n as f64);
    if parent == 0.0 {
        return None;
    }

    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<Split> = None;
    let mut column: Vec<(f64, bool)> = Vec::with_capacity(n);
    for &f in &features {
        column.clear();
        column.extend(rows.iter().map(|&r| (x[[r, f]], y[r] > 0.0)));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_pos = 0.0;
        for i in 0..n - 1 {
            if column[i].1 {
                left_pos += 1.0;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            let (lo, hi) = (column[i].0, column[i + 1].0);
            if lo == hi || n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let (nl, nr) = (n_left as f64, n_right as f64);
            let child = (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) / n as f64;
            let decrease = parent - child;
            let improves = match best {
                None => decrease > -MIN_DECREASE,
                Some(b) => decrease > b.impurity_decrease + MIN_DECREASE,
            };
            if improves {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    impurity_decrease: decrease.max(0.0),
                });
            }
        }
    }
    best
}

/// Midpoint that still satisfies `lo <= t < hi` for adjacent floats.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Grows one CART tree on every row of `x`.
pub fn grow_tree<R: Rng>(x: ArrayView2<f64>, y: &[f64], config: &ForestConfig, rng: &mut R) -> TreeNode {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    grow_on_rows(x, y, &rows, config, rng)
}

fn grow_on_rows<R: Rng>(
    x: ArrayView2<f64>,
    y: &[f64],
    rows: &[usize],
    config: &ForestConfig,
    rng: &mut R,
) -> TreeNode {
    let k = config.resolved_features_per_split(x.ncols());
    grow_node(x, y, rows.to_vec(), config, k, 0, rng)
}

fn grow_node<R: Rng>(
    x: ArrayView2<f64>,
    y: &[f64],
    rows: Vec<usize>,
    config: &ForestConfig,
    features_per_split: usize,
    depth: usize,
    rng: &mut R,
) -> TreeNode {
    let count = rows.len();
    let pos = rows.iter().filter(|&&r| y[r] > 0.0).count();
    let leaf = TreeNode::leaf(if count == 0 { 0.0 } else { pos as f64 / count as f64 }, count);
    if depth >= config.max_depth || pos == 0 || pos == count {
        return leaf;
    }

    let mut candidates = index::sample(rng, x.ncols(), features_per_split).into_vec();
    candidates.sort_unstable();
    let Some(split) = best_split(&rows, x, y, &candidates, config.min_leaf) else {
        return leaf;
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| x[[r, split.feature]] <= split.threshold);
    let left = grow_node(x, y, left_rows, config, features_per_split, depth + 1, rng);
    let right = grow_node(x, y, right_rows, config, features_per_split, depth + 1, rng);
    TreeNode::split(split.feature, split.threshold, left, right)
}

/// Generator for tree `tree_index`: ChaCha8 seeded from `seed`, with the tree
/// index selecting the stream.
pub fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

/// Trains `n_trees` trees, each on a bootstrap resample when enabled.
pub fn train_forest(x: ArrayView2<f64>, y: &[f64], config: &ForestConfig) -> Forest {
    let n = x.nrows();
    let trees = (0..config.n_trees)
        .map(|t| {
            let mut rng = tree_rng(config.seed, t);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_on_rows(x, y, &rows, config, &mut rng)
        })
        .collect();
    Forest {
        trees,
        config: config.clone(),
    }
}
