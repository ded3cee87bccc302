//! Evaluation: confusion-based metrics, cross-trial rule stability, the
//! interpretability score, and paired t-tests.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[true][predicted]`.
pub type ConfusionMatrix = Vec<Vec<usize>>;

pub fn confusion_counts(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut counts = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let bad = if t >= n_classes { Some(t) } else if p >= n_classes { Some(p) } else { None };
        if let Some(class) = bad {
            return Err(Error::UnknownClass { class, n_classes });
        }
        counts[t][p] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy plus macro-averaged precision, recall and F1 (0/0 counts as 0).
pub fn classification_metrics(counts: &ConfusionMatrix) -> Metrics {
    let c = counts.len();
    let total: usize = counts.iter().flatten().sum();
    let trace: usize = (0..c).map(|k| counts[k][k]).sum();
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for k in 0..c {
        let tp = counts[k][k];
        let predicted: usize = (0..c).map(|t| counts[t][k]).sum();
        let actual: usize = counts[k].iter().sum();
        let p = ratio(tp, predicted);
        let r = ratio(tp, actual);
        p_sum += p;
        r_sum += r;
        f_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let c = c.max(1) as f64;
    Metrics {
        accuracy: ratio(trace, total),
        precision: p_sum / c,
        recall: r_sum / c,
        f1: f_sum / c,
    }
}

/// `2|A ∩ B| / (|A| + |B|)`, defined as 1 for two empty sets.
pub fn dice_sorensen<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let common = a.intersection(b).count();
    2.0 * common as f64 / (a.len() + b.len()) as f64
}

/// Outcome of one train/evaluate trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial_index: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Selected rule texts (rounded for cross-trial matching), one set per class.
    pub selected_rules: Vec<BTreeSet<String>>,
    pub n_rules: usize,
    /// Mean conditions per selected rule, 0 when none were selected.
    pub avg_rule_len: f64,
    pub fit_seconds: f64,
}

impl TrialReport {
    /// Selected rules of all classes in one set, each tagged with its class.
    pub fn tagged_rules(&self) -> BTreeSet<String> {
        self.selected_rules
            .iter()
            .enumerate()
            .flat_map(|(c, set)| set.iter().map(move |r| format!("[{c}] {r}")))
            .collect()
    }
}

/// Mean pairwise Dice-Sorensen index over all unordered pairs of trials.
pub fn stability(trials: &[TrialReport]) -> Result<f64> {
    if trials.len() < 2 {
        return Err(Error::Config(format!(
            "stability needs at least 2 trials, got {}",
            trials.len()
        )));
    }
    let sets: Vec<_> = trials.iter().map(TrialReport::tagged_rules).collect();
    Ok(mean_pairwise_dice(&sets))
}

pub fn mean_pairwise_dice<T: Ord>(sets: &[BTreeSet<T>]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            sum += dice_sorensen(&sets[i], &sets[j]);
            pairs += 1;
        }
    }
    if pairs == 0 {
        1.0
    } else {
        sum / pairs as f64
    }
}

/// Equal-weight average of accuracy, stability, simplicity and brevity.
///
/// `simplicity = 1 - min(mean_n_rules / rule_budget, 1)`;
/// `brevity = 1 - min((mean_rule_len - 1) / max(max_depth - 1, 1), 1)`,
/// where a model without rules counts as `mean_rule_len = 1`.
pub fn interpretability_score(
    mean_accuracy: f64,
    stability: f64,
    mean_n_rules: f64,
    mean_rule_len: f64,
    rule_budget: usize,
    max_depth: usize,
) -> f64 {
    let simplicity = if rule_budget == 0 {
        1.0
    } else {
        1.0 - (mean_n_rules / rule_budget as f64).clamp(0.0, 1.0)
    };
    let rule_len = if mean_n_rules == 0.0 { 1.0 } else { mean_rule_len };
    let depth_span = (max_depth.max(2) - 1) as f64;
    let brevity = 1.0 - ((rule_len - 1.0) / depth_span).clamp(0.0, 1.0);
    let score = 0.25 * (mean_accuracy.clamp(0.0, 1.0) + stability.clamp(0.0, 1.0) + simplicity + brevity);
    score.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// May be `±inf` when the differences have zero variance.
    #[serde(with = "nonfinite")]
    pub t_statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Paired two-sided t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Config(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTestResult {
                t_statistic: 0.0,
                p_value: 1.0,
                df,
            }
        } else {
            TTestResult {
                t_statistic: f64::INFINITY.copysign(mean),
                p_value: 0.0,
                df,
            }
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(TTestResult {
        t_statistic: t,
        p_value: student_t_two_sided_p(t, df as f64),
        df,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta `I_x(a, b)` via its continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation; zeros for an empty slice.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Aggregate over trials. `stability` and `ips` are `None` for a single trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n_trials: usize,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub n_rules: MeanStd,
    pub avg_rule_len: MeanStd,
    pub stability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ips: Option<f64>,
    pub t_test: Option<PairedComparison>,
}

/// Per-metric paired t-tests of this run against a baseline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub accuracy: TTestResult,
    pub precision: TTestResult,
    pub recall: TTestResult,
    pub f1: TTestResult,
}

/// Summarizes trial reports. `rule_budget` is the total rule cap across class
/// models (r_max times the number of classes).
pub fn summarize(trials: &[TrialReport], rule_budget: usize, max_depth: usize) -> MetricsSummary {
    let col = |f: fn(&TrialReport) -> f64| MeanStd::of(&trials.iter().map(f).collect::<Vec<_>>());
    let accuracy = col(|t| t.accuracy);
    let n_rules = col(|t| t.n_rules as f64);
    let with_rules: Vec<f64> = trials
        .iter()
        .filter(|t| t.n_rules > 0)
        .map(|t| t.avg_rule_len)
        .collect();
    let mean_rule_len = if with_rules.is_empty() {
        1.0
    } else {
        with_rules.iter().sum::<f64>() / with_rules.len() as f64
    };
    let stability = stability(trials).ok();
    let ips = stability.map(|s| {
        interpretability_score(accuracy.mean, s, n_rules.mean, mean_rule_len, rule_budget, max_depth)
    });
    MetricsSummary {
        n_trials: trials.len(),
        accuracy,
        precision: col(|t| t.precision),
        recall: col(|t| t.recall),
        f1: col(|t| t.f1),
        n_rules,
        avg_rule_len: col(|t| t.avg_rule_len),
        stability,
        ips,
        t_test: None,
    }
}

/// Paired t-tests of each metric, `current - baseline`, matched by position.
pub fn compare_trials(current: &[Metrics], baseline: &[Metrics]) -> Result<PairedComparison> {
    let pick = |ms: &[Metrics], f: fn(&Metrics) -> f64| ms.iter().map(f).collect::<Vec<_>>();
    let test = |f: fn(&Metrics) -> f64| paired_t_test(&pick(current, f), &pick(baseline, f));
    Ok(PairedComparison {
        accuracy: test(|m| m.accuracy)?,
        precision: test(|m| m.precision)?,
        recall: test(|m| m.recall)?,
        f1: test(|m| m.f1)?,
    })
}

/// JSON has no infinities; encode them as the strings "inf" / "-inf".
mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Text(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(s) => Err(serde::de::Error::custom(format!("bad number {s}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn report(i: usize, rules: &[&str]) -> TrialReport {
        TrialReport {
            trial_index: i,
            seed: i as u64,
            accuracy: 1.0,
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            selected_rules: vec![set(rules)],
            n_rules: rules.len(),
            avg_rule_len: 1.0,
            fit_seconds: 0.0,
        }
    }

    #[test]
    fn confusion_cases() {
        let y = [0, 1, 1, 2, 2, 2];
        let c = confusion_counts(&y, &y, 3).unwrap();
        assert_eq!(c, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 3]]);
        let c = confusion_counts(&y, &[0; 6], 3).unwrap();
        assert!(c.iter().all(|row| row[1] == 0 && row[2] == 0));
        assert!(matches!(confusion_counts(&[], &[], 2), Err(Error::EmptyData)));
        assert!(confusion_counts(&[0], &[0, 1], 2).is_err());
        assert!(confusion_counts(&[0], &[2], 2).is_err());
    }

    #[test]
    fn metrics_on_hand_counted_table() {
        assert_eq!(
            classification_metrics(&vec![vec![3, 0], vec![0, 4]]),
            Metrics {
                accuracy: 1.0,
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );
        // TP=3, FP=1, FN=1, TN=5 with class 1 positive
        let m = classification_metrics(&vec![vec![5, 1], vec![1, 3]]);
        assert!((m.accuracy - 0.8).abs() < 1e-15);
        let expected = (0.75 + 5.0 / 6.0) / 2.0;
        assert!((m.precision - expected).abs() < 1e-15);
        assert!((m.precision - 0.7917).abs() < 1e-4);
        assert!((m.recall - expected).abs() < 1e-15);
        assert!((m.f1 - expected).abs() < 1e-15);

        // absent class contributes zeros
        let m = classification_metrics(&vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 0]]);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn dice_cases() {
        assert_eq!(dice_sorensen(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(dice_sorensen(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(dice_sorensen(&set(&["r1", "r2"]), &set(&["r2", "r3"])), 0.5);
        assert_eq!(dice_sorensen(&set(&[]), &set(&[])), 1.0);
    }

    #[test]
    fn stability_cases() {
        let same = [report(0, &["a", "b"]), report(1, &["a", "b"]), report(2, &["a", "b"])];
        assert_eq!(stability(&same).unwrap(), 1.0);
        let disjoint = [report(0, &["a"]), report(1, &["b"]), report(2, &["c"])];
        assert_eq!(stability(&disjoint).unwrap(), 0.0);
        // pairs: (0,1)=1.0, (0,2)=0.5, (1,2)=0.5
        let mixed = [report(0, &["r1", "r2"]), report(1, &["r1", "r2"]), report(2, &["r2", "r3"])];
        assert!((stability(&mixed).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(stability(&same[..1]).is_err());
    }

    #[test]
    fn class_tags_keep_rules_apart() {
        let mut a = report(0, &["x0 <= 1.0000"]);
        let mut b = a.clone();
        a.selected_rules = vec![set(&["x0 <= 1.0000"]), set(&[])];
        b.selected_rules = vec![set(&[]), set(&["x0 <= 1.0000"])];
        assert_eq!(stability(&[a, b]).unwrap(), 0.0);
    }

    #[test]
    fn ips_cases() {
        assert_eq!(interpretability_score(1.0, 1.0, 0.0, 0.0, 100, 4), 1.0);
        assert_eq!(interpretability_score(0.0, 0.0, 100.0, 4.0, 100, 4), 0.0);
        let v = interpretability_score(0.9, 0.8, 50.0, 2.5, 100, 4);
        assert!((v - 0.675).abs() < 1e-12);
    }

    #[test]
    fn t_test_cases() {
        let a = [0.3, 0.5, 0.9];
        assert_eq!(
            paired_t_test(&a, &a).unwrap(),
            TTestResult {
                t_statistic: 0.0,
                p_value: 1.0,
                df: 2
            }
        );
        let r = paired_t_test(&[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert_eq!((r.t_statistic, r.p_value), (0.0, 1.0));

        let r = paired_t_test(&[2.0, 3.0, 4.0, 5.0, 6.0], &[1.0; 5]).unwrap();
        assert!((r.t_statistic - 3.0 / 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 4);

        let r = paired_t_test(&[2.0, 2.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((r.t_statistic, r.p_value), (f64::INFINITY, 0.0));
        let r = paired_t_test(&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.t_statistic, f64::NEG_INFINITY);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"-inf\""));
        assert_eq!(serde_json::from_str::<TTestResult>(&json).unwrap(), r);

        assert!(paired_t_test(&[1.0], &[1.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn ln_gamma_reference_values() {
        let pi = std::f64::consts::PI;
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - pi.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(2.5) - (0.75 * pi.sqrt()).ln()).abs() < 1e-14);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a; I_x(1, b) = 1 - (1-x)^b
        for &x in &[0.01, 0.2, 0.5, 0.77, 0.99] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x) - x).abs() < 1e-14);
            assert!((regularized_incomplete_beta(3.0, 1.0, x) - x.powi(3)).abs() < 1e-14);
            assert!((regularized_incomplete_beta(1.0, 4.0, x) - (1.0 - (1.0 - x).powi(4))).abs() < 1e-14);
        }
    }

    #[test]
    fn t_one_df_is_cauchy() {
        // two-sided Cauchy tail: 1 - 2 atan(|t|) / pi
        for &t in &[0.1, 1.0, 3.0, 40.0] {
            let expected = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_two_sided_p(t, 1.0) - expected).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn dice_properties(a in prop::collection::btree_set(0u8..12, 0..8), b in prop::collection::btree_set(0u8..12, 0..8)) {
            let ab = dice_sorensen(&a, &b);
            prop_assert_eq!(ab, dice_sorensen(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            if !a.is_empty() || !b.is_empty() {
                prop_assert_eq!(ab == 1.0, a == b);
            }
        }

        #[test]
        fn ips_is_monotone_and_bounded(
            acc in 0.0f64..1.0, stab in 0.0f64..1.0, rules in 0.0f64..300.0, len in 1.0f64..6.0,
            bump in 0.0f64..0.5,
        ) {
            let base = interpretability_score(acc, stab, rules, len, 100, 4);
            prop_assert!((0.0..=1.0).contains(&base));
            prop_assert!(interpretability_score((acc + bump).min(1.0), stab, rules, len, 100, 4) >= base);
            prop_assert!(interpretability_score(acc, (stab + bump).min(1.0), rules, len, 100, 4) >= base);
            prop_assert!(interpretability_score(acc, stab, rules + bump * 10.0, len, 100, 4) <= base);
            prop_assert!(interpretability_score(acc, stab, rules, len + bump, 100, 4) <= base);
        }

        #[test]
        fn t_test_is_antisymmetric(a in prop::collection::vec(-5.0f64..5.0, 3..12), shift in -1.0f64..1.0) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v * 0.5 + shift + (i as f64) * 0.01).collect();
            let ab = paired_t_test(&a, &b).unwrap();
            let ba = paired_t_test(&b, &a).unwrap();
            prop_assert_eq!(ab.t_statistic, -ba.t_statistic);
            prop_assert_eq!(ab.p_value, ba.p_value);
        }

        #[test]
        fn p_value_decreases_in_abs_t(t in 0.01f64..20.0, dt in 0.01f64..5.0, df in 1usize..60) {
            let df = df as f64;
            let p1 = student_t_two_sided_p(t, df);
            let p2 = student_t_two_sided_p(t + dt, df);
            prop_assert!(p2 < p1 || p1 < 1e-300);
            prop_assert_eq!(student_t_two_sided_p(-t, df), p1);
        }

        #[test]
        fn macro_f1_is_one_only_for_diagonal(counts in prop::collection::vec(0usize..6, 9)) {
            let m: ConfusionMatrix = counts.chunks(3).map(|r| r.to_vec()).collect();
            if m.iter().flatten().sum::<usize>() > 0 {
                let f1 = classification_metrics(&m).f1;
                prop_assert!(f1 <= 1.0 + 1e-15);
                let diagonal = (0..3).all(|i| (0..3).all(|j| i == j || m[i][j] == 0));
                let all_present = (0..3).all(|k| m[k][k] > 0);
                prop_assert_eq!((f1 - 1.0).abs() < 1e-12, diagonal && all_present);
            }
        }
    }
}
