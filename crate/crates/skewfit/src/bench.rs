//! Experiment harness: repeated random splits, per-method grid search with
//! k-fold cross-validation, metric collection, and table emission.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset};
use crate::error::{Error, Result};
use crate::fwlr::{self, FwlrConfig};
use crate::glm::{self, ModelParams, OptimizerSettings};
use crate::metrics;
use crate::resample::{self, SmoteConfig};
use crate::rulsif::AlphaPlacement;
use crate::seeding;

/// The five benchmarked estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Logistic,
    CostSensitive,
    Jansche,
    Smote,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Proposed,
        Method::Logistic,
        Method::CostSensitive,
        Method::Jansche,
        Method::Smote,
    ];

    /// Stable seed-stream tag, so a method's per-trial randomness does not
    /// depend on which other methods run alongside it.
    fn stream(self) -> u64 {
        match self {
            Method::Proposed => 0,
            Method::Logistic => 1,
            Method::CostSensitive => 2,
            Method::Jansche => 3,
            Method::Smote => 4,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Proposed => "proposed",
            Method::Logistic => "logistic",
            Method::CostSensitive => "cost_sensitive",
            Method::Jansche => "jansche",
            Method::Smote => "smote",
        };
        f.write_str(s)
    }
}

/// Where the experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: String,
        label_column: String,
        positive_label: String,
    },
    /// One of the six built-in generator settings; a fresh sample of size n
    /// is drawn for every trial.
    Synthetic { setting: u8, n: usize },
}

fn default_trials() -> usize {
    100
}
fn default_train_fraction() -> f64 {
    0.7
}
fn default_cv_folds() -> usize {
    5
}
fn default_grid() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0]
}
fn default_alpha() -> f64 {
    0.5
}
fn default_threshold() -> f64 {
    0.5
}
fn default_epsilon() -> f64 {
    1e-6
}
fn default_max_outer() -> usize {
    100
}

/// Full experiment description; the outcome is a pure function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DatasetSource,
    pub methods: Vec<Method>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_grid")]
    pub lambda_beta_grid: Vec<f64>,
    #[serde(default = "default_grid")]
    pub lambda_theta_grid: Vec<f64>,
    #[serde(default = "default_grid")]
    pub sigma_grid: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer_iterations: usize,
    /// Freeze the ratio model's (sigma, lambda_theta) after the first outer
    /// iteration of each alternating fit. Cheaper; off by default.
    #[serde(default)]
    pub freeze_ratio_selection: bool,
    /// Rescale ratio weights to mean one before each weighted refit.
    #[serde(default)]
    pub renormalize_weights: bool,
    /// Fold count for the ratio model's internal (sigma, lambda_theta)
    /// selection; defaults to `cv_folds`.
    #[serde(default)]
    pub ratio_folds: Option<usize>,
}

impl ExperimentConfig {
    /// Minimal config with library defaults for everything else.
    pub fn new(source: DatasetSource, methods: Vec<Method>, trials: usize, seed: u64) -> Self {
        Self {
            source,
            methods,
            trials,
            train_fraction: default_train_fraction(),
            cv_folds: default_cv_folds(),
            lambda_beta_grid: default_grid(),
            lambda_theta_grid: default_grid(),
            sigma_grid: default_grid(),
            alpha: default_alpha(),
            threshold: default_threshold(),
            seed,
            epsilon: default_epsilon(),
            max_outer_iterations: default_max_outer(),
            freeze_ratio_selection: false,
            renormalize_weights: false,
            ratio_folds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::BadConfig(msg));
        if self.methods.is_empty() {
            return fail("methods must be non-empty".into());
        }
        if self.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        if self.cv_folds < 2 {
            return fail("cv_folds must be >= 2".into());
        }
        for (name, grid) in [
            ("lambda_beta_grid", &self.lambda_beta_grid),
            ("lambda_theta_grid", &self.lambda_theta_grid),
            ("sigma_grid", &self.sigma_grid),
        ] {
            if grid.is_empty() {
                return fail(format!("{name} must be non-empty"));
            }
            if grid.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return fail(format!("{name} entries must be positive and finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return fail(format!("threshold must be in [0, 1], got {}", self.threshold));
        }
        if let DatasetSource::Synthetic { setting, n } = &self.source {
            if !(1..=6).contains(setting) {
                return fail(format!("synthetic setting must be 1-6, got {setting}"));
            }
            if *n < 10 {
                return fail("synthetic n must be >= 10".into());
            }
        }
        Ok(())
    }
}

/// One (method, trial) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub dataset: String,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub lambda_beta: f64,
    /// Final ratio-model bandwidth, for the proposed method only.
    pub sigma: Option<f64>,
    /// Final ratio-model ridge strength, for the proposed method only.
    pub lambda_theta: Option<f64>,
    pub auc: f64,
    pub f_measure: f64,
    pub accuracy: f64,
    pub wall_time_ms: f64,
}

/// Mean and sample standard deviation of one metric across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MetricSummary { mean, sd }
}

/// Per-method aggregate over the completed trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trials_ok: usize,
    pub failures: usize,
    pub auc: MetricSummary,
    pub f_measure: MetricSummary,
    pub accuracy: MetricSummary,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dataset: String,
    pub results: Vec<TrialResult>,
    pub summaries: Vec<MethodSummary>,
    /// Human-readable records of per-method trial failures.
    pub failures: Vec<String>,
}

// Sub-stream tags for seed derivation.
const STREAM_DATA: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_GRID: u64 = 3;
const STREAM_FIT: u64 = 4;

/// A fitted model plus whatever the method selected along the way.
pub struct FittedMethod {
    pub params: ModelParams,
    pub sigma: Option<f64>,
    pub lambda_theta: Option<f64>,
}

fn fwlr_config(config: &ExperimentConfig, lambda_beta: f64, seed: u64) -> FwlrConfig {
    FwlrConfig {
        alpha: config.alpha,
        epsilon: config.epsilon,
        max_outer_iterations: config.max_outer_iterations,
        lambda_beta,
        lambda_theta_grid: config.lambda_theta_grid.clone(),
        sigma_grid: config.sigma_grid.clone(),
        ratio_folds: config.ratio_folds.unwrap_or(config.cv_folds),
        reselect_ratio_each_iteration: !config.freeze_ratio_selection,
        renormalize_weights: config.renormalize_weights,
        alpha_placement: AlphaPlacement::Printed,
        optimizer: OptimizerSettings::default(),
        include_intercept: true,
        seed,
    }
}

/// Fit one method on (already normalized) training rows. Test data is never
/// an input here, which is what keeps the harness leak-free by construction.
pub fn fit_method(
    method: Method,
    train: &Dataset,
    lambda_beta: f64,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<FittedMethod> {
    let settings = OptimizerSettings::default();
    let plain = |params: ModelParams| FittedMethod {
        params,
        sigma: None,
        lambda_theta: None,
    };
    match method {
        Method::Logistic => Ok(plain(glm::fit(train, lambda_beta, None, &settings, true)?.params)),
        Method::CostSensitive => {
            let weights = glm::cost_sensitive_weights(train)?;
            Ok(plain(
                glm::fit(train, lambda_beta, Some(&weights), &settings, true)?.params,
            ))
        }
        Method::Jansche => Ok(plain(glm::fit_soft_f(train, lambda_beta, &settings, true)?.params)),
        Method::Smote => {
            let oversampled = resample::smote(
                train,
                &SmoteConfig {
                    seed,
                    ..SmoteConfig::default()
                },
            )?;
            Ok(plain(
                glm::fit(&oversampled, lambda_beta, None, &settings, true)?.params,
            ))
        }
        Method::Proposed => {
            let fit = fwlr::fit_fwlr(train, &fwlr_config(config, lambda_beta, seed))?;
            Ok(FittedMethod {
                params: fit.params,
                sigma: Some(fit.ratio.sigma),
                lambda_theta: Some(fit.ratio.lambda_theta),
            })
        }
    }
}

/// Choose lambda_beta for a method by mean validation AUC over k folds.
/// Ties go to the larger penalty. Single-cell grids skip the sweep.
pub fn grid_search(
    method: Method,
    train: &Dataset,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<f64> {
    if config.lambda_beta_grid.len() == 1 {
        return Ok(config.lambda_beta_grid[0]);
    }
    let folds = data::kfold_indices(train.n(), config.cv_folds, seeding::derive(seed, STREAM_GRID))?;
    let all: Vec<usize> = (0..train.n()).collect();
    let mut best: Option<(f64, f64)> = None; // (mean auc, lambda)
    let mut diagnostics = Vec::new();
    for (ci, &lambda) in config.lambda_beta_grid.iter().enumerate() {
        let mut fold_aucs = Vec::with_capacity(folds.len());
        let mut cell_error = None;
        for (fi, fold) in folds.iter().enumerate() {
            let mut in_fold = vec![false; train.n()];
            for &i in fold {
                in_fold[i] = true;
            }
            let tr_idx: Vec<usize> = all.iter().copied().filter(|&i| !in_fold[i]).collect();
            let outcome = (|| -> Result<f64> {
                let tr = train.subset(&tr_idx)?;
                let va = train.subset(fold)?;
                let fit_seed = seeding::derive(seeding::derive(seed, ci as u64), fi as u64);
                let fitted = fit_method(method, &tr, lambda, config, fit_seed)?;
                let scored = fwlr::predict(&fitted.params, &va)?;
                metrics::auc(&scored)
            })();
            match outcome {
                Ok(auc) => fold_aucs.push(auc),
                Err(e) => {
                    cell_error = Some(format!("lambda_beta={lambda} fold {fi}: {e}"));
                    break;
                }
            }
        }
        if let Some(msg) = cell_error {
            diagnostics.push(msg);
            continue;
        }
        let mean = fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64;
        let better = match best {
            None => true,
            Some((best_auc, best_lambda)) => {
                mean > best_auc || (mean == best_auc && lambda > best_lambda)
            }
        };
        if better {
            best = Some((mean, lambda));
        }
    }
    match best {
        Some((_, lambda)) => Ok(lambda),
        None => Err(Error::GridExhausted(diagnostics.join("\n"))),
    }
}

/// Per-trial output: the public metric rows plus the fitted coefficients
/// (used by leakage checks; not serialized).
pub struct TrialOutput {
    pub results: Vec<TrialResult>,
    pub models: Vec<(Method, ModelParams)>,
    pub failures: Vec<String>,
}

/// Seed governing trial `trial` of the experiment.
pub fn trial_seed(config: &ExperimentConfig, trial: usize) -> u64 {
    seeding::derive(config.seed, trial as u64)
}

fn source_data(config: &ExperimentConfig, trial_seed: u64) -> Result<Dataset> {
    match &config.source {
        DatasetSource::Csv {
            path,
            label_column,
            positive_label,
        } => data::load_csv(path, label_column, positive_label),
        DatasetSource::Synthetic { setting, n } => {
            let setting = data::SyntheticSetting::by_id(*setting)?;
            data::generate_synthetic(&setting, *n, seeding::derive(trial_seed, STREAM_DATA))
        }
    }
}

/// Run one trial: split, normalize on the training side, grid-search, fit,
/// and score the held-out rows.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialOutput> {
    let seed = trial_seed(config, trial);
    let dataset = source_data(config, seed)?;
    let pair = data::split(&dataset, config.train_fraction, seeding::derive(seed, STREAM_SPLIT))?;
    let stats = data::fit_normalizer(&pair.train)?;
    let train = data::apply_normalizer(&stats, &pair.train)?;
    let test = data::apply_normalizer(&stats, &pair.test)?;

    let mut results = Vec::new();
    let mut models = Vec::new();
    let mut failures = Vec::new();
    for &method in &config.methods {
        let started = Instant::now();
        let fit_seed = seeding::derive(seed, STREAM_FIT + method.stream());
        let outcome = (|| -> Result<(TrialResult, ModelParams)> {
            let lambda_beta = grid_search(method, &train, config, fit_seed)?;
            let fitted = fit_method(method, &train, lambda_beta, config, fit_seed)?;
            let scored = fwlr::predict(&fitted.params, &test)?;
            let confusion = metrics::confusion(&scored, config.threshold)?;
            let result = TrialResult {
                dataset: dataset.name().to_string(),
                method,
                trial,
                seed,
                lambda_beta,
                sigma: fitted.sigma,
                lambda_theta: fitted.lambda_theta,
                auc: metrics::auc(&scored)?,
                f_measure: metrics::f_measure(&confusion).value,
                accuracy: metrics::accuracy(&confusion).value,
                wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
            };
            Ok((result, fitted.params))
        })();
        match outcome {
            Ok((result, params)) => {
                results.push(result);
                models.push((method, params));
            }
            Err(e) => failures.push(format!("trial {trial}, {method}: {e}")),
        }
    }
    Ok(TrialOutput {
        results,
        models,
        failures,
    })
}

/// Run every trial (in parallel, gathered in trial order) and summarize.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let trial_outputs: Vec<Result<TrialOutput>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, trial))
        .collect();

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (trial, output) in trial_outputs.into_iter().enumerate() {
        match output {
            Ok(mut out) => {
                results.append(&mut out.results);
                failures.append(&mut out.failures);
            }
            Err(e) => failures.push(format!("trial {trial}: {e}")),
        }
    }
    if results.is_empty() {
        return Err(Error::GridExhausted(failures.join("\n")));
    }
    let dataset = results[0].dataset.clone();

    let mut summaries = Vec::new();
    for &method in &config.methods {
        let rows: Vec<&TrialResult> = results.iter().filter(|r| r.method == method).collect();
        if rows.is_empty() {
            continue;
        }
        let metric = |f: fn(&TrialResult) -> f64| summarize(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
        summaries.push(MethodSummary {
            method,
            trials_ok: rows.len(),
            failures: config.trials - rows.len(),
            auc: metric(|r| r.auc),
            f_measure: metric(|r| r.f_measure),
            accuracy: metric(|r| r.accuracy),
        });
    }
    for failure in &failures {
        log::warn!("{failure}");
    }
    Ok(ExperimentOutcome {
        dataset,
        results,
        summaries,
        failures,
    })
}

/// Write one JSON object per line.
pub fn write_results_jsonl<W: Write>(mut out: W, results: &[TrialResult]) -> Result<()> {
    for r in results {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Read results back from JSON lines.
pub fn read_results_jsonl(path: impl AsRef<Path>) -> Result<Vec<TrialResult>> {
    let file = std::fs::File::open(path)?;
    let mut results = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        results.push(serde_json::from_str(&line)?);
    }
    Ok(results)
}

/// Report output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

const METRICS: [(&str, fn(&TrialResult) -> f64); 3] = [
    ("AUC", |r| r.auc),
    ("F-measure", |r| r.f_measure),
    ("Accuracy", |r| r.accuracy),
];

/// Render one table per metric (method columns, mean/s.d. rows per dataset).
/// Markdown bolds the best mean in each row; CSV uses a long layout that
/// round-trips through a plain CSV reader.
pub fn emit_report(results: &[TrialResult], format: ReportFormat) -> Result<String> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut datasets: Vec<String> = results.iter().map(|r| r.dataset.clone()).collect();
    datasets.sort();
    datasets.dedup();
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| results.iter().any(|r| r.method == *m))
        .collect();

    let cell = |dataset: &str, method: Method, value: fn(&TrialResult) -> f64| {
        let rows: Vec<f64> = results
            .iter()
            .filter(|r| r.dataset == dataset && r.method == method)
            .map(value)
            .collect();
        if rows.is_empty() {
            None
        } else {
            Some(summarize(&rows))
        }
    };

    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            for (metric_name, value) in METRICS {
                out.push_str(&format!("## {metric_name}\n\n"));
                out.push_str("| Dataset |");
                for m in &methods {
                    out.push_str(&format!(" {m} |"));
                }
                out.push('\n');
                out.push_str("|---|");
                out.push_str(&"---|".repeat(methods.len()));
                out.push('\n');
                for dataset in &datasets {
                    let cells: Vec<Option<MetricSummary>> =
                        methods.iter().map(|&m| cell(dataset, m, value)).collect();
                    let best = cells
                        .iter()
                        .flatten()
                        .map(|s| s.mean)
                        .fold(f64::NEG_INFINITY, f64::max);
                    out.push_str(&format!("| {dataset} |"));
                    for c in &cells {
                        match c {
                            Some(s) if s.mean == best => {
                                out.push_str(&format!(" **{:.3}** ({:.3}) |", s.mean, s.sd))
                            }
                            Some(s) => out.push_str(&format!(" {:.3} ({:.3}) |", s.mean, s.sd)),
                            None => out.push_str(" - |"),
                        }
                    }
                    out.push('\n');
                }
                out.push('\n');
            }
        }
        ReportFormat::Csv => {
            out.push_str("dataset,metric,method,mean,sd,trials\n");
            for (metric_name, value) in METRICS {
                for dataset in &datasets {
                    for &m in &methods {
                        if let Some(s) = cell(dataset, m, value) {
                            let n = results
                                .iter()
                                .filter(|r| r.dataset == *dataset && r.method == m)
                                .count();
                            out.push_str(&format!(
                                "{dataset},{metric_name},{m},{:.17},{:.17},{n}\n",
                                s.mean, s.sd
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Console-friendly summary block.
pub fn format_summaries(outcome: &ExperimentOutcome) -> String {
    let mut out = format!("dataset: {}\n", outcome.dataset);
    out.push_str(&format!(
        "{:<16} {:>6} {:>16} {:>16} {:>16}\n",
        "method", "ok", "auc", "f_measure", "accuracy"
    ));
    for s in &outcome.summaries {
        out.push_str(&format!(
            "{:<16} {:>6} {:>8.3}/{:<7.3} {:>8.3}/{:<7.3} {:>8.3}/{:<7.3}\n",
            s.method.to_string(),
            s.trials_ok,
            s.auc.mean,
            s.auc.sd,
            s.f_measure.mean,
            s.f_measure.sd,
            s.accuracy.mean,
            s.accuracy.sd,
        ));
    }
    if !outcome.failures.is_empty() {
        out.push_str(&format!("failures: {}\n", outcome.failures.len()));
    }
    out
}
