//! Built-in learners and seeded k-fold cross-validation.

mod cart;
mod encode;
mod knn;
mod logreg;
mod metrics;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{DqiError, Result};
use crate::tabular::{mean_and_stddev, DType, Dataset, SnapshotId};

pub use cart::{best_split, train_cart, CartParams, CartTarget, Criterion, Node, Split, Tree};
pub use encode::Encoder;
pub use knn::{nearest, predict_knn, KnnParams, KnnTarget};
pub use logreg::{logistic_gradient, logistic_loss, train_logreg, LogReg, LogRegParams};
pub use metrics::{classification_metrics, confusion_matrix, regression_metrics};

pub(crate) fn check_finite(x: &[Vec<f64>]) -> Result<()> {
    for (row, values) in x.iter().enumerate() {
        if let Some(feature) = values.iter().position(|v| !v.is_finite()) {
            return Err(DqiError::NonFinite { row, feature });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Classification,
    Regression,
}

impl Task {
    pub fn primary_metric(self) -> &'static str {
        match self {
            Task::Classification => "f1",
            Task::Regression => "rmse",
        }
    }

    /// Whether larger values of `metric` are better.
    pub fn higher_is_better(metric: &str) -> bool {
        !matches!(metric, "rmse" | "mae")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Logreg,
    Cart,
    Knn,
}

/// Hyperparameters of all models; only those of the selected model are read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ModelParams {
    #[serde(flatten)]
    pub logreg: LogRegParams,
    #[serde(flatten)]
    pub cart: CartParams,
    #[serde(flatten)]
    pub knn: KnnParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct EvalConfig {
    pub task: Task,
    pub model: ModelKind,
    pub model_params: ModelParams,
    pub folds: usize,
    pub seed: u64,
    /// Feature columns; by default every non-text column except the label.
    pub features: Option<Vec<String>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            task: Task::Classification,
            model: ModelKind::Logreg,
            model_params: ModelParams::default(),
            folds: 5,
            seed: 42,
            features: None,
        }
    }
}

impl EvalConfig {
    /// Default configuration with the task guessed from the label: numeric
    /// labels with more than ten distinct values are regression targets.
    pub fn for_dataset(ds: &Dataset) -> EvalConfig {
        let mut cfg = EvalConfig::default();
        if let Some(idx) = ds.label_column().and_then(|l| ds.column_index(l).ok()) {
            if ds.columns()[idx].dtype == DType::Numeric {
                let mut values: Vec<f64> = ds.numeric_values(idx).into_iter().map(|(_, v)| v).collect();
                values.sort_by(f64::total_cmp);
                values.dedup();
                if values.len() > 10 {
                    cfg.task = Task::Regression;
                }
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(DqiError::InvalidConfig(format!("folds must be at least 2, got {}", self.folds)));
        }
        let p = &self.model_params;
        match self.model {
            ModelKind::Logreg => {
                if self.task == Task::Regression {
                    return Err(DqiError::InvalidConfig("logreg only supports classification".into()));
                }
                if !(p.logreg.learning_rate > 0.0 && p.logreg.learning_rate.is_finite()) || !(p.logreg.l2 >= 0.0) {
                    return Err(DqiError::InvalidConfig("logreg needs learning_rate > 0 and l2 >= 0".into()));
                }
            }
            ModelKind::Cart => match (self.task, p.cart.criterion) {
                (Task::Classification, Some(Criterion::Mse)) | (Task::Regression, Some(Criterion::Gini)) => {
                    return Err(DqiError::InvalidConfig("cart criterion does not match the task".into()));
                }
                _ => {}
            },
            ModelKind::Knn => {
                if p.knn.k < 1 {
                    return Err(DqiError::InvalidConfig("knn needs k >= 1".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: IndexMap<String, f64>,
    /// `confusion[true][predicted]` over class ids (classification only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EvalReport {
    pub snapshot_id: SnapshotId,
    pub config: EvalConfig,
    pub label: String,
    pub features: Vec<String>,
    /// Class names indexed by class id (classification only).
    #[serde(default)]
    pub classes: Vec<String>,
    pub rows_used: usize,
    /// Rows left out because the label or a feature was missing.
    pub rows_excluded: usize,
    pub per_fold: Vec<FoldResult>,
    pub mean: IndexMap<String, f64>,
    /// Sample standard deviation across folds.
    pub std: IndexMap<String, f64>,
    pub primary_metric: String,
}

impl EvalReport {
    pub fn primary(&self) -> f64 {
        self.mean[&self.primary_metric]
    }
}

enum Labels {
    Classes(Vec<usize>, usize),
    Values(Vec<f64>),
}

fn resolve_features(ds: &Dataset, config: &EvalConfig, label_idx: usize) -> Result<Vec<usize>> {
    let label = &ds.columns()[label_idx].name;
    let cols: Vec<usize> = match &config.features {
        Some(names) => {
            let mut out = Vec::new();
            for n in names {
                if n == label {
                    return Err(DqiError::LabelProtected(n.clone()));
                }
                let idx = ds.column_index(n)?;
                if !out.contains(&idx) {
                    out.push(idx);
                }
            }
            out
        }
        None => (0..ds.column_count())
            .filter(|&c| c != label_idx && ds.columns()[c].dtype != DType::Text)
            .collect(),
    };
    if cols.is_empty() {
        return Err(DqiError::InsufficientData("no feature columns to evaluate".into()));
    }
    Ok(cols)
}

/// Fold id for every position of `strata` (class id per row, or all zeros):
/// each stratum is shuffled with the seeded generator and dealt round-robin,
/// continuing where the previous stratum stopped.
fn assign_folds(strata: &[usize], n_strata: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; strata.len()];
    let mut next = 0;
    for s in 0..n_strata {
        let mut members: Vec<usize> = (0..strata.len()).filter(|&i| strata[i] == s).collect();
        members.shuffle(&mut rng);
        for m in members {
            fold_of[m] = next % folds;
            next += 1;
        }
    }
    fold_of
}

pub fn cross_validate(ds: &Dataset, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let label = ds
        .label_column()
        .ok_or_else(|| DqiError::InvalidConfig("evaluation needs a label column".into()))?
        .to_string();
    let label_idx = ds.column_index(&label)?;
    let features = resolve_features(ds, config, label_idx)?;

    let used: Vec<usize> = (0..ds.row_count())
        .filter(|&r| {
            let row = &ds.rows()[r];
            !row[label_idx].is_missing() && features.iter().all(|&c| !row[c].is_missing())
        })
        .collect();
    let rows_excluded = ds.row_count() - used.len();

    let mut classes = Vec::new();
    let labels = match config.task {
        Task::Classification => {
            let names: Vec<String> = used.iter().map(|&r| ds.rows()[r][label_idx].render().expect("observed").into_owned()).collect();
            classes = names.clone();
            classes.sort();
            classes.dedup();
            if classes.len() < 2 {
                return Err(DqiError::InsufficientData(format!("classification needs at least 2 label classes, found {}", classes.len())));
            }
            let ids: Vec<usize> = names.iter().map(|n| classes.binary_search(n).expect("class listed")).collect();
            for (c, name) in classes.iter().enumerate() {
                let count = ids.iter().filter(|&&i| i == c).count();
                if count < config.folds {
                    return Err(DqiError::InsufficientData(format!(
                        "class `{name}` has {count} usable rows, fewer than the {} folds",
                        config.folds
                    )));
                }
            }
            Labels::Classes(ids, classes.len())
        }
        Task::Regression => {
            let dtype = ds.columns()[label_idx].dtype;
            if !matches!(dtype, DType::Numeric | DType::Boolean | DType::Timestamp) {
                return Err(DqiError::incompatible(&label, "regression needs a numeric label"));
            }
            if used.len() < config.folds {
                return Err(DqiError::InsufficientData(format!(
                    "{} usable rows, fewer than the {} folds",
                    used.len(),
                    config.folds
                )));
            }
            Labels::Values(used.iter().map(|&r| ds.rows()[r][label_idx].as_f64().expect("observed")).collect())
        }
    };

    let fold_of = match &labels {
        Labels::Classes(ids, k) => assign_folds(ids, *k, config.folds, config.seed),
        Labels::Values(v) => assign_folds(&vec![0; v.len()], 1, config.folds, config.seed),
    };

    let per_fold = (0..config.folds)
        .into_par_iter()
        .map(|fold| run_fold(ds, config, &features, &used, &labels, &fold_of, fold))
        .collect::<Result<Vec<_>>>()?;

    let metric_names: Vec<String> = per_fold[0].metrics.keys().cloned().collect();
    let mut mean = IndexMap::new();
    let mut std = IndexMap::new();
    for name in metric_names {
        let values: Vec<f64> = per_fold.iter().map(|f| f.metrics[&name]).collect();
        let (m, s) = mean_and_stddev(&values);
        mean.insert(name.clone(), m);
        std.insert(name, s);
    }
    Ok(EvalReport {
        snapshot_id: ds.snapshot_id().clone(),
        config: config.clone(),
        label,
        features: features.iter().map(|&c| ds.columns()[c].name.clone()).collect(),
        classes,
        rows_used: used.len(),
        rows_excluded,
        per_fold,
        mean,
        std,
        primary_metric: config.task.primary_metric().to_string(),
    })
}

fn run_fold(
    ds: &Dataset,
    config: &EvalConfig,
    features: &[usize],
    used: &[usize],
    labels: &Labels,
    fold_of: &[usize],
    fold: usize,
) -> Result<FoldResult> {
    let (test_pos, train_pos): (Vec<usize>, Vec<usize>) = (0..used.len()).partition(|&i| fold_of[i] == fold);
    let train_rows: Vec<usize> = train_pos.iter().map(|&i| used[i]).collect();
    let test_rows: Vec<usize> = test_pos.iter().map(|&i| used[i]).collect();
    let encoder = Encoder::fit(ds, &train_rows, features);
    let x_train = encoder.transform(ds, &train_rows);
    let x_test = encoder.transform(ds, &test_rows);
    let p = &config.model_params;

    let (metrics, confusion) = match labels {
        Labels::Classes(ids, k) => {
            let y_train: Vec<usize> = train_pos.iter().map(|&i| ids[i]).collect();
            let y_test: Vec<usize> = test_pos.iter().map(|&i| ids[i]).collect();
            let pred: Vec<usize> = match config.model {
                ModelKind::Logreg => {
                    let m = train_logreg(&x_train, &y_train, &p.logreg)?;
                    x_test.iter().map(|r| m.predict(r)).collect()
                }
                ModelKind::Cart => {
                    let params = CartParams {
                        criterion: Some(Criterion::Gini),
                        ..p.cart
                    };
                    let t = train_cart(&x_train, CartTarget::Classes(&y_train, *k), &params)?;
                    x_test.iter().map(|r| t.predict(r) as usize).collect()
                }
                ModelKind::Knn => x_test
                    .iter()
                    .map(|r| predict_knn(&x_train, KnnTarget::Classes(&y_train, *k), r, p.knn.k).map(|v| v as usize))
                    .collect::<Result<_>>()?,
            };
            let cm = confusion_matrix(&y_test, &pred, *k);
            (classification_metrics(&cm), Some(cm))
        }
        Labels::Values(v) => {
            let y_train: Vec<f64> = train_pos.iter().map(|&i| v[i]).collect();
            let y_test: Vec<f64> = test_pos.iter().map(|&i| v[i]).collect();
            let pred: Vec<f64> = match config.model {
                ModelKind::Logreg => unreachable!("rejected by validate"),
                ModelKind::Cart => {
                    let params = CartParams {
                        criterion: Some(Criterion::Mse),
                        ..p.cart
                    };
                    let t = train_cart(&x_train, CartTarget::Values(&y_train), &params)?;
                    x_test.iter().map(|r| t.predict(r)).collect()
                }
                ModelKind::Knn => x_test
                    .iter()
                    .map(|r| predict_knn(&x_train, KnnTarget::Values(&y_train), r, p.knn.k))
                    .collect::<Result<_>>()?,
            };
            (regression_metrics(&y_test, &pred), None)
        }
    };
    Ok(FoldResult {
        fold,
        train_size: train_rows.len(),
        test_size: test_rows.len(),
        metrics,
        confusion,
    })
}

/// Change from `before` to `after`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PerformanceDelta {
    pub primary_metric: String,
    /// `after - before` of the primary metric's fold mean.
    pub delta_mean: f64,
    /// `after - before` of the primary metric's fold standard deviation.
    pub delta_std: f64,
    /// `after - before` of every metric's fold mean.
    pub per_metric: IndexMap<String, f64>,
    /// `delta_mean` signed so that positive is better.
    pub improvement: f64,
}

pub fn compare_performance(before: &EvalReport, after: &EvalReport) -> Result<PerformanceDelta> {
    if before.config.task != after.config.task || before.primary_metric != after.primary_metric {
        return Err(DqiError::InvalidConfig("reports are for different tasks".into()));
    }
    let metric = before.primary_metric.clone();
    let per_metric: IndexMap<String, f64> = before
        .mean
        .iter()
        .filter_map(|(k, b)| after.mean.get(k).map(|a| (k.clone(), a - b)))
        .collect();
    let delta_mean = per_metric[&metric];
    let delta_std = after.std[&metric] - before.std[&metric];
    Ok(PerformanceDelta {
        improvement: if Task::higher_is_better(&metric) { delta_mean } else { -delta_mean },
        primary_metric: metric,
        delta_mean,
        delta_std,
        per_metric,
    })
}
