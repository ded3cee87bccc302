//! Repeated train/test trials, their summaries and output files, and grid
//! search over `(r_max, lambda, kappa)`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::Sr4FitClassifier;
use crate::dataset::{split_indices, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::evalx::{compare_trials, summarize, Metrics, MetricsSummary, TrialReport};
use crate::forest::ForestConfig;
use crate::rulegen::STABILITY_PRECISION;
use crate::sr3opt::{HyperParams, OptimizerConfig};

/// Candidate values for grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperGrid {
    pub r_max: Vec<usize>,
    pub lambda: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            r_max: vec![50, 100, 200],
            lambda: vec![0.01, 0.1, 1.0],
            kappa: vec![0.1, 1.0, 10.0],
        }
    }
}

impl HyperGrid {
    /// All combinations, `r_max` outermost and `kappa` innermost.
    pub fn points(&self) -> Vec<HyperParams> {
        let mut out = Vec::new();
        for &r_max in &self.r_max {
            for &lambda in &self.lambda {
                for &kappa in &self.kappa {
                    out.push(HyperParams { lambda, kappa, r_max });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_max.is_empty() || self.lambda.is_empty() || self.kappa.is_empty() {
            return Err(Error::Config("grid lists must be nonempty".into()));
        }
        self.points().iter().try_for_each(HyperParams::validate)
    }
}

/// Every knob of an experiment. Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub test_fraction: f64,
    pub n_trials: usize,
    pub base_seed: u64,
    /// Run every trial with `base_seed` instead of `base_seed + i`.
    pub same_seed: bool,
    /// Hyperparameters for `train` and `trials`.
    pub hyperparams: HyperParams,
    pub grid: HyperGrid,
    pub validation_trials: usize,
    /// Grid-search each trial's training portion before fitting it.
    pub tune_per_trial: bool,
    pub forest: ForestConfig,
    pub optimizer: OptimizerConfig,
    pub out: PathBuf,
    /// Decimals used to match rules across trials.
    pub stability_precision: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: None,
            target: None,
            test_fraction: 0.3,
            n_trials: 30,
            base_seed: 0,
            same_seed: false,
            hyperparams: HyperParams::default(),
            grid: HyperGrid::default(),
            validation_trials: 5,
            tune_per_trial: false,
            forest: ForestConfig::default(),
            optimizer: OptimizerConfig::default(),
            out: PathBuf::from("out"),
            stability_precision: STABILITY_PRECISION,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.n_trials == 0 || self.validation_trials == 0 {
            return Err(Error::Config("n_trials and validation_trials must be positive".into()));
        }
        self.hyperparams.validate()?;
        self.grid.validate()?;
        self.forest.validate()?;
        self.optimizer.validate()
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        if self.same_seed {
            self.base_seed
        } else {
            self.base_seed.wrapping_add(trial as u64)
        }
    }

    pub fn fit(&self, train: &Dataset, hp: &HyperParams, seed: u64) -> Result<Sr4FitClassifier> {
        Sr4FitClassifier::fit(train, hp, &self.forest, &self.optimizer, seed)
    }
}

/// Result of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub r_max: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub mean_accuracy: f64,
    pub accuracies: Vec<f64>,
}

impl GridPoint {
    pub fn hyperparams(&self) -> HyperParams {
        HyperParams {
            lambda: self.lambda,
            kappa: self.kappa,
            r_max: self.r_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub points: Vec<GridPoint>,
    pub chosen: GridPoint,
}

/// Best point: highest mean accuracy, then smaller `r_max`, larger `lambda`,
/// smaller `kappa`.
pub fn choose_point(points: &[GridPoint]) -> Option<&GridPoint> {
    points.iter().min_by(|a, b| {
        b.mean_accuracy
            .total_cmp(&a.mean_accuracy)
            .then(a.r_max.cmp(&b.r_max))
            .then(b.lambda.total_cmp(&a.lambda))
            .then(a.kappa.total_cmp(&b.kappa))
    })
}

/// Grid search on `train` alone: each point is scored by its mean validation
/// accuracy over `validation_trials` stratified splits of `train` seeded from
/// `seed`, `seed + 1`, and so on.
pub fn grid_search(train: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<GridResult> {
    grid_search_with_observer(train, cfg, seed, |_| {})
}

/// [`grid_search`] that reports the source row ids of every subset it fits
/// or scores.
pub fn grid_search_with_observer<F: FnMut(&[usize])>(
    train: &Dataset,
    cfg: &ExperimentConfig,
    seed: u64,
    mut observer: F,
) -> Result<GridResult> {
    cfg.grid.validate()?;
    let splits = (0..cfg.validation_trials)
        .map(|k| {
            let s = seed.wrapping_add(k as u64);
            let (fit_rows, val_rows) = split_indices(
                &train.labels,
                SplitSpec {
                    test_fraction: cfg.test_fraction,
                    seed: s,
                },
            )?;
            Ok((s, train.subset(&fit_rows), train.subset(&val_rows)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::new();
    for hp in cfg.grid.points() {
        let mut accuracies = Vec::with_capacity(splits.len());
        for (s, fit_part, val_part) in &splits {
            observer(&fit_part.row_ids);
            observer(&val_part.row_ids);
            let clf = cfg.fit(fit_part, &hp, *s)?;
            accuracies.push(clf.accuracy(val_part)?);
        }
        points.push(GridPoint {
            r_max: hp.r_max,
            lambda: hp.lambda,
            kappa: hp.kappa,
            mean_accuracy: accuracies.iter().sum::<f64>() / accuracies.len() as f64,
            accuracies,
        });
    }
    let chosen = choose_point(&points).expect("grid is nonempty").clone();
    Ok(GridResult { points, chosen })
}

/// Splits `data` with `seed`, fits on the training part and scores the test
/// part. With `tune_per_trial` the hyperparameters come from a grid search on
/// the training part; otherwise `cfg.hyperparams` is used.
pub fn run_trial(data: &Dataset, cfg: &ExperimentConfig, trial_index: usize, seed: u64) -> Result<TrialReport> {
    let (train_rows, test_rows) = split_indices(
        &data.labels,
        SplitSpec {
            test_fraction: cfg.test_fraction,
            seed,
        },
    )?;
    let train = data.subset(&train_rows);
    let test = data.subset(&test_rows);
    let hp = if cfg.tune_per_trial {
        grid_search(&train, cfg, seed)?.chosen.hyperparams()
    } else {
        cfg.hyperparams
    };
    let start = Instant::now();
    let clf = cfg.fit(&train, &hp, seed)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let m = clf.evaluate(&test)?;
    let selected_rules: Vec<BTreeSet<String>> = clf.selected_rule_texts(cfg.stability_precision);
    Ok(TrialReport {
        trial_index,
        seed,
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        n_rules: selected_rules.iter().map(BTreeSet::len).sum(),
        avg_rule_len: clf.avg_selected_rule_len(),
        selected_rules,
        fit_seconds,
    })
}

pub fn run_trials(data: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<TrialReport>> {
    cfg.validate()?;
    (0..cfg.n_trials)
        .map(|i| run_trial(data, cfg, i, cfg.trial_seed(i)).map_err(|e| Error::in_trial(i, e)))
        .collect()
}

/// Summary whose IPS budget is `r_max` rules for each class model.
pub fn summarize_trials(trials: &[TrialReport], cfg: &ExperimentConfig, n_classes: usize) -> MetricsSummary {
    summarize(trials, cfg.hyperparams.r_max * n_classes, cfg.forest.max_depth)
}

const CSV_HEADER: [&str; 8] = [
    "trial", "seed", "accuracy", "precision", "recall", "f1", "n_rules", "avg_rule_len",
];

/// One row per trial. Timing is left out so reruns produce identical files.
pub fn write_trials_csv(trials: &[TrialReport], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(CSV_HEADER)?;
    for t in trials {
        w.write_record([
            t.trial_index.to_string(),
            t.seed.to_string(),
            t.accuracy.to_string(),
            t.precision.to_string(),
            t.recall.to_string(),
            t.f1.to_string(),
            t.n_rules.to_string(),
            t.avg_rule_len.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

/// Reads the metric columns of a file written by [`write_trials_csv`].
pub fn read_trial_metrics(path: impl AsRef<Path>) -> Result<Vec<Metrics>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column {name}", path.display())))
    };
    let idx = [col("accuracy")?, col("precision")?, col("recall")?, col("f1")?];
    let mut out = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let v = idx
            .iter()
            .map(|&c| {
                record[c].parse::<f64>().map_err(|_| Error::NonNumeric {
                    row: r + 1,
                    column: headers[c].to_string(),
                    value: record[c].to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Metrics {
            accuracy: v[0],
            precision: v[1],
            recall: v[2],
            f1: v[3],
        });
    }
    Ok(out)
}

/// Attaches paired t-tests of `trials` against baseline metrics.
pub fn with_baseline(mut summary: MetricsSummary, trials: &[TrialReport], baseline: &[Metrics]) -> Result<MetricsSummary> {
    let current: Vec<Metrics> = trials
        .iter()
        .map(|t| Metrics {
            accuracy: t.accuracy,
            precision: t.precision,
            recall: t.recall,
            f1: t.f1,
        })
        .collect();
    summary.t_test = Some(compare_trials(&current, baseline)?);
    Ok(summary)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-2.0..2.0));
        let labels = (0..n).map(|i| usize::from(x[[i, 0]] + 0.5 * x[[i, 1]] > 0.0)).collect();
        Dataset::new(
            x,
            labels,
            vec!["a".into(), "b".into(), "c".into()],
            vec!["no".into(), "yes".into()],
        )
        .unwrap()
    }

    fn quick_cfg() -> ExperimentConfig {
        ExperimentConfig {
            n_trials: 3,
            validation_trials: 2,
            forest: ForestConfig {
                n_trees: 4,
                max_depth: 3,
                min_leaf: 3,
                ..Default::default()
            },
            hyperparams: HyperParams {
                r_max: 20,
                ..Default::default()
            },
            grid: HyperGrid {
                r_max: vec![10],
                lambda: vec![0.1],
                kappa: vec![1.0],
            },
            ..Default::default()
        }
    }

    fn point(r_max: usize, lambda: f64, kappa: f64, acc: f64) -> GridPoint {
        GridPoint {
            r_max,
            lambda,
            kappa,
            mean_accuracy: acc,
            accuracies: vec![acc],
        }
    }

    #[test]
    fn tie_break_order() {
        let pts = [
            point(100, 0.1, 1.0, 0.9),
            point(50, 0.1, 1.0, 0.9),
            point(50, 1.0, 1.0, 0.9),
            point(50, 1.0, 0.1, 0.9),
            point(200, 0.01, 0.1, 0.8),
        ];
        assert_eq!(choose_point(&pts), Some(&pts[3]));
        let better = [pts[0].clone(), point(200, 0.01, 10.0, 0.95)];
        assert_eq!(choose_point(&better), Some(&better[1]));
    }

    #[test]
    fn grid_points_enumerate_product() {
        let g = HyperGrid::default();
        let pts = g.points();
        assert_eq!(pts.len(), 27);
        assert_eq!(pts[0], HyperParams { lambda: 0.01, kappa: 0.1, r_max: 50 });
        assert!(HyperGrid { r_max: vec![], ..g }.validate().is_err());
    }

    #[test]
    fn single_point_grid_is_chosen() {
        let data = toy(60, 1);
        let cfg = quick_cfg();
        let res = grid_search(&data, &cfg, 0).unwrap();
        assert_eq!(res.points.len(), 1);
        assert_eq!(res.chosen, res.points[0]);
    }

    #[test]
    fn huge_lambda_is_not_chosen() {
        let data = toy(80, 2);
        let mut cfg = quick_cfg();
        cfg.grid.lambda = vec![0.01, 1e6];
        let res = grid_search(&data, &cfg, 0).unwrap();
        assert_eq!(res.chosen.lambda, 0.01);
    }

    #[test]
    fn same_seed_trials_are_perfectly_stable() {
        let data = toy(60, 3);
        let mut cfg = quick_cfg();
        cfg.n_trials = 2;
        cfg.same_seed = true;
        let trials = run_trials(&data, &cfg).unwrap();
        let s = summarize_trials(&trials, &cfg, 2);
        assert_eq!(s.stability, Some(1.0));
    }

    #[test]
    fn single_trial_has_no_stability_or_ips() {
        let data = toy(60, 3);
        let mut cfg = quick_cfg();
        cfg.n_trials = 1;
        let trials = run_trials(&data, &cfg).unwrap();
        let s = summarize_trials(&trials, &cfg, 2);
        assert_eq!(s.stability, None);
        let json = serde_json::to_value(&s).unwrap();
        assert!(json["stability"].is_null());
        assert!(json.get("ips").is_none());
    }

    #[test]
    fn csv_round_trips_metrics() {
        let data = toy(60, 4);
        let cfg = quick_cfg();
        let trials = run_trials(&data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.csv");
        write_trials_csv(&trials, &path).unwrap();
        let back = read_trial_metrics(&path).unwrap();
        assert_eq!(back.len(), trials.len());
        for (m, t) in back.iter().zip(&trials) {
            assert_eq!(m.accuracy, t.accuracy);
            assert_eq!(m.f1, t.f1);
        }
        let s = with_baseline(summarize_trials(&trials, &cfg, 2), &trials, &back).unwrap();
        assert_eq!(s.t_test.unwrap().accuracy.p_value, 1.0);
    }

    #[test]
    fn config_json_defaults_and_unknown_fields() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"n_trials": 4, "grid": {"lambda": [0.5]}}"#).unwrap();
        assert_eq!(cfg.n_trials, 4);
        assert_eq!(cfg.grid.lambda, vec![0.5]);
        assert_eq!(cfg.grid.r_max, vec![50, 100, 200]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"trials": 4}"#).is_err());
        assert!(ExperimentConfig { test_fraction: 1.0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn grid_search_never_reads_held_out_rows(seed in 0u64..1000) {
            let data = toy(50, seed);
            let cfg = quick_cfg();
            let (train_rows, test_rows) = split_indices(
                &data.labels,
                SplitSpec { test_fraction: cfg.test_fraction, seed },
            ).unwrap();
            let train = data.subset(&train_rows);
            let held_out: BTreeSet<usize> = test_rows.iter().map(|&i| data.row_ids[i]).collect();
            let mut seen = BTreeSet::new();
            grid_search_with_observer(&train, &cfg, seed, |rows| seen.extend(rows.iter().copied())).unwrap();
            prop_assert!(!seen.is_empty());
            prop_assert!(seen.is_disjoint(&held_out));
        }
    }
}
