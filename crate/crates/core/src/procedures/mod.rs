//! The six data-driven cleaning families. Every procedure is a pure function
//! from a [`Dataset`] to a new [`Dataset`] plus diagnostics.

mod dedup;
mod delete;
mod feature_select;
mod impute;
mod outliers;
mod spec;
mod standardize;

use indexmap::IndexMap;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{DqiError, Result};
use crate::tabular::{DType, Dataset, SnapshotId, TimestampPattern};

pub use dedup::{levenshtein_similarity, DedupMode};
pub(crate) use dedup::duplicate_groups;
pub use delete::DeleteMode;
pub use feature_select::{equal_frequency_bins, mutual_information_bits, pearson, FeatureSelectMethod};
pub use impute::ImputeMethod;
pub use outliers::{detect_outliers, lof_scores, treat_outliers, OutlierAction, OutlierFlags, OutlierMethod};
pub use spec::{method_schema, method_schemas, Family, MethodSchema, ParamKind, ParamSchema, ProcedureSpec, Target, TargetKind};
pub use standardize::StandardizeRule;

use spec::Params;

/// Method-specific report attached to every result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostics {
    Impute {
        /// Cells filled per column.
        filled: IndexMap<String, usize>,
        /// Rows filled with the donor mean because a predictor was missing.
        #[serde(default)]
        fallback_rows: usize,
    },
    Outlier {
        column: String,
        flagged_rows: Vec<usize>,
        fences: [f64; 2],
        warnings: Vec<String>,
    },
    Delete {
        removed_rows: Vec<usize>,
        removed_columns: Vec<String>,
    },
    Standardize {
        converted: IndexMap<String, usize>,
        /// Rows whose value could not be converted, per column.
        unconverted: IndexMap<String, Vec<usize>>,
        retyped: Vec<String>,
    },
    Dedup {
        /// Row groups (first row kept), each with at least two members.
        groups: Vec<Vec<usize>>,
    },
    FeatureSelect {
        dropped: Vec<String>,
        kept: Vec<String>,
        scores: IndexMap<String, f64>,
    },
}

/// Outcome of applying a procedure. The counts are derived from an actual
/// cell-by-cell diff of input and output.
#[derive(Debug, Clone)]
pub struct ProcedureResult {
    pub spec: ProcedureSpec,
    pub input_snapshot: SnapshotId,
    pub output: Dataset,
    pub cells_changed: usize,
    pub rows_removed: usize,
    pub cols_removed: usize,
    pub diagnostics: Diagnostics,
}

/// Serializable view of a [`ProcedureResult`] without the output table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ProcedureSummary {
    pub spec: ProcedureSpec,
    pub input_snapshot: SnapshotId,
    pub output_snapshot: SnapshotId,
    pub cells_changed: usize,
    pub rows_removed: usize,
    pub cols_removed: usize,
    pub diagnostics: Diagnostics,
}

impl ProcedureResult {
    /// `kept_rows[i]` / `kept_cols[j]` give the input position of output row
    /// `i` / column `j`.
    pub(crate) fn build(
        spec: ProcedureSpec,
        input: &Dataset,
        output: Dataset,
        kept_rows: &[usize],
        kept_cols: &[usize],
        diagnostics: Diagnostics,
    ) -> Self {
        debug_assert_eq!(kept_rows.len(), output.row_count());
        debug_assert_eq!(kept_cols.len(), output.column_count());
        let cells_changed = output
            .rows()
            .iter()
            .zip(kept_rows)
            .map(|(row, &r)| {
                row.iter()
                    .zip(kept_cols)
                    .filter(|(cell, &c)| **cell != input.rows()[r][c])
                    .count()
            })
            .sum();
        ProcedureResult {
            spec,
            input_snapshot: input.snapshot_id().clone(),
            cells_changed,
            rows_removed: input.row_count() - output.row_count(),
            cols_removed: input.column_count() - output.column_count(),
            output,
            diagnostics,
        }
    }

    pub fn summary(&self) -> ProcedureSummary {
        ProcedureSummary {
            spec: self.spec.clone(),
            input_snapshot: self.input_snapshot.clone(),
            output_snapshot: self.output.snapshot_id().clone(),
            cells_changed: self.cells_changed,
            rows_removed: self.rows_removed,
            cols_removed: self.cols_removed,
            diagnostics: self.diagnostics.clone(),
        }
    }
}

/// A validated, typed procedure.
#[derive(Debug, Clone, PartialEq)]
pub enum Procedure {
    Impute { target: Target, method: ImputeMethod },
    Outlier { column: String, method: OutlierMethod, action: OutlierAction },
    Delete(DeleteMode),
    Standardize { target: Target, rule: StandardizeRule },
    Dedup(DedupMode),
    FeatureSelect { target: Target, method: FeatureSelectMethod, label: Option<String> },
}

fn single(target: &Target, method: &str) -> Result<String> {
    match target {
        Target::Columns(c) if c.len() == 1 => Ok(c[0].clone()),
        _ => Err(DqiError::spec(format!("{method} needs exactly one target column"))),
    }
}

impl Procedure {
    /// Validates the wire form against the method's parameter schema.
    pub fn from_spec(spec: &ProcedureSpec) -> Result<Self> {
        let schema = method_schema(spec.family, &spec.method)?;
        let params = Params::validate(&schema, &spec.params)?;
        if let Target::Columns(c) = &spec.target {
            if c.is_empty() {
                return Err(DqiError::spec("target column list is empty"));
            }
        }
        let method = spec.method.as_str();
        Ok(match spec.family {
            Family::Impute => Procedure::Impute {
                target: spec.target.clone(),
                method: match method {
                    "mean" => ImputeMethod::Mean,
                    "median" => ImputeMethod::Median,
                    "mode" => ImputeMethod::Mode,
                    "constant" => ImputeMethod::Constant(params.value("value").clone()),
                    "knn" => ImputeMethod::Knn { k: params.usize("k") },
                    _ => ImputeMethod::Linreg {
                        predictors: params.strings("predictors"),
                    },
                },
            },
            Family::Outlier => Procedure::Outlier {
                column: single(&spec.target, method)?,
                method: match method {
                    "zscore" => OutlierMethod::Zscore { t: params.f64("t") },
                    "iqr" => OutlierMethod::Iqr { f: params.f64("f") },
                    _ => OutlierMethod::Lof {
                        k: params.usize("k"),
                        threshold: params.f64("threshold"),
                    },
                },
                action: match params.str("action") {
                    "to_missing" => OutlierAction::ToMissing,
                    "clip_to_fence" => OutlierAction::ClipToFence,
                    _ => OutlierAction::RemoveRows,
                },
            },
            Family::Delete => Procedure::Delete(match method {
                "rows_with_missing" => DeleteMode::RowsWithMissing { target: spec.target.clone() },
                "rows_by_index" => DeleteMode::RowsByIndex {
                    indices: params.indices("indices"),
                },
                _ => DeleteMode::Column {
                    column: single(&spec.target, method)?,
                },
            }),
            Family::Standardize => Procedure::Standardize {
                target: spec.target.clone(),
                rule: match method {
                    "trim_whitespace" => StandardizeRule::TrimWhitespace,
                    "case_fold" => StandardizeRule::CaseFold {
                        upper: params.str("case") == "upper",
                    },
                    "date_to_iso" => StandardizeRule::DateToIso {
                        pattern: serde_json::from_value::<TimestampPattern>(Value::from(params.str("pattern")))
                            .map_err(|_| DqiError::spec(format!("unknown date pattern `{}`", params.str("pattern"))))?,
                    },
                    "numeric_unseparate" => StandardizeRule::NumericUnseparate {
                        group_char: params.char("group_char"),
                        decimal_char: params.char("decimal_char"),
                    },
                    _ => StandardizeRule::MapValues {
                        dictionary: params.string_map("dictionary"),
                    },
                },
            },
            Family::Dedup => Procedure::Dedup(match method {
                "exact" => DedupMode::Exact { key: spec.target.clone() },
                _ => {
                    let threshold = params.f64("threshold");
                    if !(threshold > 0.0 && threshold <= 1.0) {
                        return Err(DqiError::spec(format!("fuzzy threshold {threshold} outside (0, 1]")));
                    }
                    DedupMode::Fuzzy {
                        key: spec.target.clone(),
                        threshold,
                    }
                }
            }),
            Family::FeatureSelect => Procedure::FeatureSelect {
                target: spec.target.clone(),
                label: params.opt_str("label").map(str::to_string),
                method: match method {
                    "variance_threshold" => FeatureSelectMethod::VarianceThreshold { t: params.f64("t") },
                    "correlation_filter" => FeatureSelectMethod::CorrelationFilter { r_max: params.f64("r_max") },
                    _ => FeatureSelectMethod::MutualInfoTopK {
                        k: params.usize("k"),
                        bins: params.usize("bins"),
                    },
                },
            },
        })
    }

    /// Normalized wire form with every parameter spelled out.
    pub fn to_spec(&self) -> ProcedureSpec {
        let mut params = Map::new();
        let mut put = |k: &str, v: Value| {
            params.insert(k.to_string(), v);
        };
        let (family, method, target) = match self {
            Procedure::Impute { target, method } => {
                let name = match method {
                    ImputeMethod::Mean => "mean",
                    ImputeMethod::Median => "median",
                    ImputeMethod::Mode => "mode",
                    ImputeMethod::Constant(v) => {
                        put("value", v.clone());
                        "constant"
                    }
                    ImputeMethod::Knn { k } => {
                        put("k", Value::from(*k));
                        "knn"
                    }
                    ImputeMethod::Linreg { predictors } => {
                        put("predictors", Value::from(predictors.clone()));
                        "linreg"
                    }
                };
                (Family::Impute, name, target.clone())
            }
            Procedure::Outlier { column, method, action } => {
                let name = match method {
                    OutlierMethod::Zscore { t } => {
                        put("t", Value::from(*t));
                        "zscore"
                    }
                    OutlierMethod::Iqr { f } => {
                        put("f", Value::from(*f));
                        "iqr"
                    }
                    OutlierMethod::Lof { k, threshold } => {
                        put("k", Value::from(*k));
                        put("threshold", Value::from(*threshold));
                        "lof"
                    }
                };
                put("action", Value::from(action.as_str()));
                (Family::Outlier, name, Target::Columns(vec![column.clone()]))
            }
            Procedure::Delete(mode) => match mode {
                DeleteMode::RowsWithMissing { target } => (Family::Delete, "rows_with_missing", target.clone()),
                DeleteMode::RowsByIndex { indices } => {
                    put("indices", Value::from(indices.clone()));
                    (Family::Delete, "rows_by_index", Target::All)
                }
                DeleteMode::Column { column } => (Family::Delete, "column", Target::Columns(vec![column.clone()])),
            },
            Procedure::Standardize { target, rule } => {
                let name = match rule {
                    StandardizeRule::TrimWhitespace => "trim_whitespace",
                    StandardizeRule::CaseFold { upper } => {
                        put("case", Value::from(if *upper { "upper" } else { "lower" }));
                        "case_fold"
                    }
                    StandardizeRule::DateToIso { pattern } => {
                        put("pattern", serde_json::to_value(pattern).expect("pattern serializes"));
                        "date_to_iso"
                    }
                    StandardizeRule::NumericUnseparate { group_char, decimal_char } => {
                        put("group_char", Value::from(group_char.to_string()));
                        put("decimal_char", Value::from(decimal_char.to_string()));
                        "numeric_unseparate"
                    }
                    StandardizeRule::MapValues { dictionary } => {
                        let map: Map<String, Value> = dictionary.iter().map(|(k, v)| (k.clone(), Value::from(v.clone()))).collect();
                        put("dictionary", Value::Object(map));
                        "map_values"
                    }
                };
                (Family::Standardize, name, target.clone())
            }
            Procedure::Dedup(mode) => match mode {
                DedupMode::Exact { key } => (Family::Dedup, "exact", key.clone()),
                DedupMode::Fuzzy { key, threshold } => {
                    put("threshold", Value::from(*threshold));
                    (Family::Dedup, "fuzzy", key.clone())
                }
            },
            Procedure::FeatureSelect { target, method, label } => {
                let name = match method {
                    FeatureSelectMethod::VarianceThreshold { t } => {
                        put("t", Value::from(*t));
                        "variance_threshold"
                    }
                    FeatureSelectMethod::CorrelationFilter { r_max } => {
                        put("r_max", Value::from(*r_max));
                        "correlation_filter"
                    }
                    FeatureSelectMethod::MutualInfoTopK { k, bins } => {
                        put("k", Value::from(*k));
                        put("bins", Value::from(*bins));
                        "mutual_info_topk"
                    }
                };
                put("label", label.clone().map_or(Value::Null, Value::from));
                (Family::FeatureSelect, name, target.clone())
            }
        };
        ProcedureSpec {
            family,
            method: method.to_string(),
            params,
            target,
        }
    }

    pub fn apply(&self, ds: &Dataset) -> Result<ProcedureResult> {
        let spec = self.to_spec();
        match self {
            Procedure::Impute { target, method } => impute::run(ds, target, method, spec),
            Procedure::Outlier { column, method, action } => {
                let flags = detect_outliers(ds, column, method)?;
                outliers::treat(ds, &flags, *action, spec)
            }
            Procedure::Delete(mode) => delete::run(ds, mode, spec),
            Procedure::Standardize { target, rule } => standardize::run(ds, target, rule, spec),
            Procedure::Dedup(mode) => dedup::run(ds, mode, spec),
            Procedure::FeatureSelect { target, method, label } => feature_select::run(ds, target, method, label.as_deref(), spec),
        }
    }
}

/// Validates and applies a wire-form spec.
pub fn run_spec(ds: &Dataset, spec: &ProcedureSpec) -> Result<ProcedureResult> {
    Procedure::from_spec(spec)?.apply(ds)
}

pub fn impute(ds: &Dataset, column: &str, method: ImputeMethod) -> Result<ProcedureResult> {
    Procedure::Impute {
        target: Target::Columns(vec![column.to_string()]),
        method,
    }
    .apply(ds)
}

pub fn delete(ds: &Dataset, mode: DeleteMode) -> Result<ProcedureResult> {
    Procedure::Delete(mode).apply(ds)
}

pub fn standardize(ds: &Dataset, column: &str, rule: StandardizeRule) -> Result<ProcedureResult> {
    Procedure::Standardize {
        target: Target::Columns(vec![column.to_string()]),
        rule,
    }
    .apply(ds)
}

pub fn dedup(ds: &Dataset, mode: DedupMode) -> Result<ProcedureResult> {
    if let DedupMode::Fuzzy { threshold, .. } = &mode {
        if !(*threshold > 0.0 && *threshold <= 1.0) {
            return Err(DqiError::spec(format!("fuzzy threshold {threshold} outside (0, 1]")));
        }
    }
    Procedure::Dedup(mode).apply(ds)
}

pub fn feature_select(ds: &Dataset, method: FeatureSelectMethod, label: &str) -> Result<ProcedureResult> {
    Procedure::FeatureSelect {
        target: Target::All,
        method,
        label: Some(label.to_string()),
    }
    .apply(ds)
}

/// Resolves a target to column indices. `All` keeps columns accepted by
/// `applicable`; explicit columns must exist.
pub(crate) fn resolve_columns(ds: &Dataset, target: &Target, applicable: impl Fn(usize) -> bool) -> Result<Vec<usize>> {
    match target {
        Target::All => Ok((0..ds.column_count()).filter(|&i| applicable(i)).collect()),
        Target::Columns(names) => {
            let mut out = Vec::with_capacity(names.len());
            for n in names {
                let idx = ds.column_index(n)?;
                if !out.contains(&idx) {
                    out.push(idx);
                }
            }
            Ok(out)
        }
    }
}

pub(crate) fn require_numeric(ds: &Dataset, idx: usize) -> Result<()> {
    let col = &ds.columns()[idx];
    if col.dtype == DType::Numeric {
        Ok(())
    } else {
        Err(DqiError::incompatible(&col.name, format!("{} column is not numeric", col.dtype.as_str())))
    }
}
