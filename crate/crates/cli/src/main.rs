//! `sr4fit` command-line tool.
//!
//! Exit codes: 0 on success, 1 for runtime and I/O failures, 2 for usage and
//! configuration errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sr4fit::dataset::{load_csv, read_feature_table, split_indices, Dataset, SplitSpec};
use sr4fit::experiment::{
    grid_search, read_trial_metrics, run_trials, summarize_trials, with_baseline, write_json, write_trials_csv,
    ExperimentConfig,
};
use sr4fit::{Error, Sr4FitClassifier};

#[derive(Parser)]
#[command(name = "sr4fit", version, about = "Sparse rule-ensemble classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit on every row of a CSV and write the model and its rule report
    Train(Common),
    /// Predict classes and per-class probabilities for a CSV
    Predict(PredictArgs),
    /// Repeat split/fit/evaluate and write trials.csv and summary.json
    Trials(TrialsArgs),
    /// Grid search on the training portion and write grid.json
    Grid(Common),
    /// Print the rule report of a model file
    Rules {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the label column
    #[arg(long)]
    target: Option<String>,
    /// Model file to write (default: <out>/model.json)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    rmax: Option<usize>,
    #[arg(long = "test-fraction")]
    test_fraction: Option<f64>,
}

#[derive(Args)]
struct TrialsArgs {
    #[command(flatten)]
    common: Common,
    /// Grid-search each trial's training portion before fitting
    #[arg(long)]
    tune: bool,
    /// trials.csv of another run to compare against with paired t-tests
    #[arg(long)]
    baseline: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Column to ignore if present (e.g. the label)
    #[arg(long)]
    target: Option<String>,
    /// Directory for predictions.csv (default: standard output)
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.data {
            cfg.data = Some(v.clone());
        }
        if let Some(v) = &self.target {
            cfg.target = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.trials {
            cfg.n_trials = v;
        }
        if let Some(v) = self.lambda {
            cfg.hyperparams.lambda = v;
            cfg.grid.lambda = vec![v];
        }
        if let Some(v) = self.kappa {
            cfg.hyperparams.kappa = v;
            cfg.grid.kappa = vec![v];
        }
        if let Some(v) = self.rmax {
            cfg.hyperparams.r_max = v;
            cfg.grid.r_max = vec![v];
        }
        if let Some(v) = self.test_fraction {
            cfg.test_fraction = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_data(cfg: &ExperimentConfig) -> Result<Dataset, Failure> {
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| Failure::Usage("missing --data (or \"data\" in the config)".into()))?;
    let target = cfg
        .target
        .as_ref()
        .ok_or_else(|| Failure::Usage("missing --target (or \"target\" in the config)".into()))?;
    Ok(load_csv(data, target)?)
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn train(args: &Common) -> CmdResult {
    let cfg = args.resolve()?;
    let data = load_data(&cfg)?;
    let clf = cfg.fit(&data, &cfg.hyperparams, cfg.base_seed)?;
    create_dir(&cfg.out)?;
    let model_path = args.model.clone().unwrap_or_else(|| cfg.out.join("model.json"));
    clf.save(&model_path)?;
    let rules_path = cfg.out.join("rules.txt");
    fs::write(&rules_path, clf.rule_report()).map_err(|e| io_failure(&rules_path, e))?;

    for m in &clf.class_models {
        let d = &m.diagnostics;
        println!(
            "class {} ({}): nnz={} rules={}/{} iterations={} converged={} objective={:.6}",
            m.class_id,
            clf.class_names[m.class_id],
            d.nnz,
            m.selected_rules().count(),
            m.rules.len(),
            d.outer_iterations,
            d.converged,
            d.final_objective
        );
    }
    println!("training accuracy: {:.4}", clf.accuracy(&data)?);
    println!("model: {}", model_path.display());
    println!("rules: {}", rules_path.display());
    Ok(())
}

fn predict(args: &PredictArgs) -> CmdResult {
    let clf = Sr4FitClassifier::load(&args.model)?;
    let file = fs::File::open(&args.data).map_err(|e| io_failure(&args.data, e))?;
    let x = read_feature_table(file, &clf.feature_names, args.target.as_deref())?;
    let proba = clf.predict_proba_batch(x.view())?;

    let mut out: Box<dyn Write> = match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            let path = dir.join("predictions.csv");
            Box::new(fs::File::create(&path).map_err(|e| io_failure(&path, e))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut header = vec!["row".to_string(), "predicted".to_string()];
    header.extend(clf.class_names.iter().map(|c| format!("p_{c}")));
    let mut w = csv::Writer::from_writer(&mut out);
    let write_err = |e: csv::Error| Failure::Runtime(e.to_string());
    w.write_record(&header).map_err(write_err)?;
    for (i, row) in proba.rows().into_iter().enumerate() {
        let p = row.to_vec();
        let mut record = vec![i.to_string(), clf.class_names[sr4fit::classifier::argmax(&p)].clone()];
        record.extend(p.iter().map(f64::to_string));
        w.write_record(&record).map_err(write_err)?;
    }
    w.flush().map_err(|e| Failure::Runtime(e.to_string()))
}

fn trials(args: &TrialsArgs) -> CmdResult {
    let mut cfg = args.common.resolve()?;
    cfg.tune_per_trial |= args.tune;
    let data = load_data(&cfg)?;
    let baseline = args.baseline.as_ref().map(read_trial_metrics).transpose()?;
    let reports = run_trials(&data, &cfg)?;
    let mut summary = summarize_trials(&reports, &cfg, data.n_classes());
    if let Some(b) = baseline {
        summary = with_baseline(summary, &reports, &b)?;
    }
    if cfg.n_trials == 1 {
        eprintln!("warning: a single trial has no stability; stability is null and ips is omitted");
    }

    create_dir(&cfg.out)?;
    write_trials_csv(&reports, cfg.out.join("trials.csv"))?;
    write_json(&summary, cfg.out.join("summary.json"))?;
    for t in &reports {
        println!(
            "trial {:>3} seed {:>6}: accuracy {:.4} f1 {:.4} rules {} ({:.2}s)",
            t.trial_index, t.seed, t.accuracy, t.f1, t.n_rules, t.fit_seconds
        );
    }
    println!(
        "accuracy {:.4} ± {:.4}, f1 {:.4} ± {:.4}",
        summary.accuracy.mean, summary.accuracy.std, summary.f1.mean, summary.f1.std
    );
    if let (Some(s), Some(ips)) = (summary.stability, summary.ips) {
        println!("stability {s:.4}, ips {ips:.4}");
    }
    Ok(())
}

fn grid(args: &Common) -> CmdResult {
    let cfg = args.resolve()?;
    let data = load_data(&cfg)?;
    let (train_rows, _) = split_indices(
        &data.labels,
        SplitSpec {
            test_fraction: cfg.test_fraction,
            seed: cfg.base_seed,
        },
    )?;
    let result = grid_search(&data.subset(&train_rows), &cfg, cfg.base_seed)?;
    create_dir(&cfg.out)?;
    write_json(&result, cfg.out.join("grid.json"))?;
    for p in &result.points {
        println!(
            "r_max {:>4} lambda {:<8} kappa {:<8} accuracy {:.4}",
            p.r_max, p.lambda, p.kappa, p.mean_accuracy
        );
    }
    let c = &result.chosen;
    println!(
        "chosen: r_max {} lambda {} kappa {} (accuracy {:.4})",
        c.r_max, c.lambda, c.kappa, c.mean_accuracy
    );
    Ok(())
}

fn rules(model: &Path) -> CmdResult {
    let clf = Sr4FitClassifier::load(model)?;
    print!("{}", clf.rule_report());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Trials(a) => trials(a),
        Command::Grid(a) => grid(a),
        Command::Rules { model } => rules(model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
