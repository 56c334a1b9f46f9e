//! Data-quality dimension scores, per column and for a whole dataset.
//!
//! Five dimensions are scored: completeness, uniqueness, validity,
//! consistency and outlier freedom. A dimension that cannot be measured
//! (no declared rules, no outlier method, ...) is `None` and is left out of
//! the overall score rather than counted as perfect.

mod rules;

use indexmap::IndexMap;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{DqiError, Result};
use crate::procedures::{detect_outliers, duplicate_groups, DedupMode, OutlierFlags, OutlierMethod, Target};
use crate::tabular::{DType, Dataset, FormatRule, SnapshotId};

pub use rules::{Clause, CmpOp, Literal, Operand, Rule};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DimensionScores {
    pub completeness: Option<f64>,
    pub uniqueness: Option<f64>,
    pub validity: Option<f64>,
    pub consistency: Option<f64>,
    pub outlier_freedom: Option<f64>,
    pub overall: f64,
}

/// Non-negative relative weights for the overall score. Only the weights of
/// defined dimensions are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct DimensionWeights {
    pub completeness: f64,
    pub uniqueness: f64,
    pub validity: f64,
    pub consistency: f64,
    pub outlier_freedom: f64,
}

impl Default for DimensionWeights {
    fn default() -> Self {
        DimensionWeights {
            completeness: 1.0,
            uniqueness: 1.0,
            validity: 1.0,
            consistency: 1.0,
            outlier_freedom: 1.0,
        }
    }
}

impl DimensionWeights {
    fn validate(&self) -> Result<()> {
        let all = [self.completeness, self.uniqueness, self.validity, self.consistency, self.outlier_freedom];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DqiError::InvalidConfig("dimension weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

impl DimensionScores {
    fn with_overall(mut self, weights: &DimensionWeights) -> Self {
        let pairs = [
            (self.completeness, weights.completeness),
            (self.uniqueness, weights.uniqueness),
            (self.validity, weights.validity),
            (self.consistency, weights.consistency),
            (self.outlier_freedom, weights.outlier_freedom),
        ];
        let defined: Vec<(f64, f64)> = pairs.iter().filter_map(|(s, w)| s.map(|s| (s, *w))).collect();
        let total_w: f64 = defined.iter().map(|(_, w)| w).sum();
        self.overall = if defined.is_empty() {
            1.0
        } else if total_w > 0.0 {
            defined.iter().map(|(s, w)| s * w).sum::<f64>() / total_w
        } else {
            defined.iter().map(|(s, _)| s).sum::<f64>() / defined.len() as f64
        };
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct QualityConfig {
    /// Cross-column rules in the consistency grammar.
    pub consistency_rules: Vec<String>,
    /// Detector used for outlier freedom; `None` leaves it undefined.
    pub outlier_method: Option<OutlierMethod>,
    pub weights: DimensionWeights,
}

impl QualityConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ColumnReport {
    pub dtype: DType,
    pub scores: DimensionScores,
    pub missing_rows: Vec<usize>,
    /// Observed cells that break the declared format or domain rule.
    pub rule_violations: Vec<usize>,
    pub outlier_rows: Vec<usize>,
    /// Why a dimension was left undefined, or detector warnings.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct QualityReport {
    pub snapshot_id: SnapshotId,
    pub row_count: usize,
    pub column_count: usize,
    pub dataset: DimensionScores,
    pub per_column: IndexMap<String, ColumnReport>,
    /// Groups of identical rows, first occurrence first.
    pub duplicate_groups: Vec<Vec<usize>>,
    /// Rows that fail at least one evaluable consistency rule.
    pub consistency_violations: Vec<usize>,
}

/// `1 - missing / total` over one column or the whole table; 1.0 when
/// there are no cells.
pub fn completeness(ds: &Dataset, column: Option<&str>) -> Result<f64> {
    let (missing, total) = match column {
        Some(name) => {
            let idx = ds.column_index(name)?;
            (ds.column(idx).filter(|c| c.is_missing()).count(), ds.row_count())
        }
        None => (
            ds.rows().iter().flatten().filter(|c| c.is_missing()).count(),
            ds.row_count() * ds.column_count(),
        ),
    };
    Ok(ratio(missing, total))
}

fn ratio(bad: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        1.0 - bad as f64 / total as f64
    }
}

/// `1 - (rows beyond the first of each identical group) / rows`.
pub fn uniqueness(ds: &Dataset) -> (f64, Vec<Vec<usize>>) {
    let groups = duplicate_groups(ds, &DedupMode::Exact { key: Target::All }).expect("all columns resolve");
    let extra: usize = groups.iter().map(|g| g.len() - 1).sum();
    (ratio(extra, ds.row_count()), groups)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityOutcome {
    pub ratio: f64,
    pub observed: usize,
    pub violations: Vec<usize>,
}

/// Share of observed cells meeting every declared rule; `None` when the
/// column declares no rule.
pub fn validity(ds: &Dataset, column: &str) -> Result<Option<ValidityOutcome>> {
    let idx = ds.column_index(column)?;
    let schema = &ds.columns()[idx];
    if !schema.has_rules() {
        return Ok(None);
    }
    let format = schema.declared_format.as_deref().map(FormatRule::parse).transpose()?;
    let mut observed = 0;
    let mut violations = Vec::new();
    for (r, cell) in ds.column(idx).enumerate() {
        if cell.is_missing() {
            continue;
        }
        observed += 1;
        let ok = format.as_ref().is_none_or(|f| f.admits(cell)) && schema.domain_rule.as_ref().is_none_or(|d| d.admits(cell));
        if !ok {
            violations.push(r);
        }
    }
    Ok(Some(ValidityOutcome {
        ratio: ratio(violations.len(), observed),
        observed,
        violations,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyOutcome {
    pub ratio: f64,
    /// Rows where at least one rule could be evaluated.
    pub evaluated: usize,
    pub violations: Vec<usize>,
}

/// Share of rows satisfying every rule they can be evaluated on. A rule is
/// skipped for a row when one of its columns is missing there, and a row
/// with no evaluable rule leaves the denominator. `None` for an empty rule
/// list.
pub fn consistency(ds: &Dataset, rules: &[String]) -> Result<Option<ConsistencyOutcome>> {
    if rules.is_empty() {
        return Ok(None);
    }
    let parsed = rules
        .iter()
        .enumerate()
        .map(|(i, src)| Rule::parse(src, i, ds))
        .collect::<Result<Vec<_>>>()?;
    let mut evaluated = 0;
    let mut violations = Vec::new();
    for (r, row) in ds.rows().iter().enumerate() {
        let outcomes: Vec<bool> = parsed.iter().filter_map(|rule| rule.eval(row)).collect();
        if outcomes.is_empty() {
            continue;
        }
        evaluated += 1;
        if outcomes.contains(&false) {
            violations.push(r);
        }
    }
    Ok(Some(ConsistencyOutcome {
        ratio: ratio(violations.len(), evaluated),
        evaluated,
        violations,
    }))
}

/// `1 - flagged / eligible` for one numeric column, with the flags.
pub fn outlier_freedom(ds: &Dataset, column: &str, method: &OutlierMethod) -> Result<(f64, OutlierFlags)> {
    let flags = detect_outliers(ds, column, method)?;
    Ok((ratio(flags.rows.len(), flags.eligible), flags))
}

pub fn quality_report(ds: &Dataset, config: &QualityConfig) -> Result<QualityReport> {
    config.validate()?;
    let weights = &config.weights;
    let consistency = consistency(ds, &config.consistency_rules)?;
    let (uniq, groups) = uniqueness(ds);

    let columns: Vec<(String, ColumnReport, Option<ValidityOutcome>, Option<OutlierFlags>)> = ds
        .columns()
        .par_iter()
        .enumerate()
        .map(|(idx, schema)| -> Result<_> {
            let mut notes = Vec::new();
            let missing_rows: Vec<usize> = ds.column(idx).enumerate().filter(|(_, c)| c.is_missing()).map(|(r, _)| r).collect();
            let valid = validity(ds, &schema.name)?;
            let flags = match (&config.outlier_method, schema.dtype) {
                (Some(method), DType::Numeric) => match detect_outliers(ds, &schema.name, method) {
                    Ok(f) => {
                        notes.extend(f.warnings.iter().cloned());
                        Some(f)
                    }
                    Err(DqiError::InsufficientData(msg)) => {
                        notes.push(msg);
                        None
                    }
                    Err(e) => return Err(e),
                },
                _ => None,
            };
            let scores = DimensionScores {
                completeness: Some(ratio(missing_rows.len(), ds.row_count())),
                validity: valid.as_ref().map(|v| v.ratio),
                outlier_freedom: flags.as_ref().map(|f| ratio(f.rows.len(), f.eligible)),
                ..Default::default()
            }
            .with_overall(weights);
            let report = ColumnReport {
                dtype: schema.dtype,
                scores,
                missing_rows,
                rule_violations: valid.as_ref().map(|v| v.violations.clone()).unwrap_or_default(),
                outlier_rows: flags.as_ref().map(|f| f.rows.clone()).unwrap_or_default(),
                notes,
            };
            Ok((schema.name.clone(), report, valid, flags))
        })
        .collect::<Result<Vec<_>>>()?;

    let pooled = |pairs: &mut dyn Iterator<Item = (usize, usize)>| -> Option<f64> {
        let mut any = false;
        let (mut bad, mut total) = (0, 0);
        for (b, t) in pairs {
            any = true;
            bad += b;
            total += t;
        }
        any.then(|| ratio(bad, total))
    };
    let validity_all = pooled(&mut columns.iter().filter_map(|(_, _, v, _)| v.as_ref().map(|v| (v.violations.len(), v.observed))));
    let outliers_all = pooled(&mut columns.iter().filter_map(|(_, _, _, f)| f.as_ref().map(|f| (f.rows.len(), f.eligible))));
    let missing_total: usize = columns.iter().map(|(_, c, _, _)| c.missing_rows.len()).sum();
    let dataset = DimensionScores {
        completeness: Some(ratio(missing_total, ds.row_count() * ds.column_count())),
        uniqueness: Some(uniq),
        validity: validity_all,
        consistency: consistency.as_ref().map(|c| c.ratio),
        outlier_freedom: outliers_all,
        overall: 0.0,
    }
    .with_overall(weights);

    Ok(QualityReport {
        snapshot_id: ds.snapshot_id().clone(),
        row_count: ds.row_count(),
        column_count: ds.column_count(),
        dataset,
        per_column: columns.into_iter().map(|(n, c, _, _)| (n, c)).collect(),
        duplicate_groups: groups,
        consistency_violations: consistency.map(|c| c.violations).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{CellValue, ColumnSchema, DomainRule};

    fn num(v: f64) -> CellValue {
        CellValue::Number(v)
    }

    #[test]
    fn completeness_ratio() {
        let cols = (0..10).map(|i| ColumnSchema::new(format!("c{i}"), DType::Numeric)).collect();
        let mut rows = vec![vec![num(1.0); 10]; 10];
        for i in 0..5 {
            rows[i][i] = CellValue::Missing;
        }
        let ds = Dataset::new(cols, rows, None).unwrap();
        assert!((completeness(&ds, None).unwrap() - 0.95).abs() < 1e-12);
        assert_eq!(completeness(&ds, Some("c9")).unwrap(), 1.0);
        assert!(completeness(&ds, Some("zz")).is_err());
        let empty = Dataset::new(vec![ColumnSchema::new("a", DType::Numeric)], vec![], None).unwrap();
        assert_eq!(completeness(&empty, None).unwrap(), 1.0);
    }

    #[test]
    fn uniqueness_counts_extra_rows() {
        let cols = vec![ColumnSchema::new("a", DType::Numeric)];
        let rows = vec![vec![num(1.0)], vec![CellValue::Missing], vec![num(2.0)], vec![CellValue::Missing]];
        let (u, groups) = uniqueness(&Dataset::new(cols, rows, None).unwrap());
        assert_eq!(u, 0.75);
        assert_eq!(groups, vec![vec![1, 3]]);
    }

    #[test]
    fn validity_range_and_undefined() {
        let mut col = ColumnSchema::new("x", DType::Numeric);
        col.domain_rule = Some(DomainRule::Range { min: 0.0, max: 100.0 });
        let rows = vec![vec![num(5.0)], vec![num(150.0)], vec![num(50.0)], vec![CellValue::Missing]];
        let ds = Dataset::new(vec![col], rows.clone(), None).unwrap();
        let v = validity(&ds, "x").unwrap().unwrap();
        assert!((v.ratio - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(v.violations, vec![1]);
        let plain = Dataset::new(vec![ColumnSchema::new("x", DType::Numeric)], rows, None).unwrap();
        assert!(validity(&plain, "x").unwrap().is_none());
    }

    #[test]
    fn consistency_examples() {
        let cols = vec![ColumnSchema::new("start", DType::Numeric), ColumnSchema::new("end", DType::Numeric)];
        let ds = Dataset::new(cols, vec![vec![num(1.0), num(2.0)], vec![num(3.0), num(1.0)]], None).unwrap();
        let c = consistency(&ds, &["end >= start".into()]).unwrap().unwrap();
        assert_eq!(c.ratio, 0.5);
        assert_eq!(c.violations, vec![1]);
        assert!(consistency(&ds, &[]).unwrap().is_none());
        assert!(matches!(
            consistency(&ds, &["end >= start".into(), "end >>".into()]),
            Err(DqiError::InvalidRule { index: 1, .. })
        ));
    }

    #[test]
    fn clean_report() {
        let cols = vec![ColumnSchema::new("a", DType::Numeric), ColumnSchema::new("b", DType::Categorical)];
        let rows = (0..5).map(|i| vec![num(i as f64), CellValue::Text(format!("v{i}"))]).collect();
        let ds = Dataset::new(cols, rows, None).unwrap();
        let report = quality_report(&ds, &QualityConfig::default()).unwrap();
        assert_eq!(report.dataset.completeness, Some(1.0));
        assert_eq!(report.dataset.uniqueness, Some(1.0));
        assert_eq!(report.dataset.validity, None);
        assert_eq!(report.dataset.consistency, None);
        assert_eq!(report.dataset.outlier_freedom, None);
        assert_eq!(report.dataset.overall, 1.0);
        assert_eq!(report, quality_report(&ds, &QualityConfig::default()).unwrap());
    }

    #[test]
    fn weights_normalize_over_defined() {
        let scores = DimensionScores {
            completeness: Some(0.5),
            uniqueness: Some(1.0),
            ..Default::default()
        };
        let w = DimensionWeights {
            completeness: 3.0,
            validity: 100.0,
            ..Default::default()
        };
        assert!((scores.with_overall(&w).overall - 0.625).abs() < 1e-12);
        let bad = QualityConfig {
            weights: DimensionWeights { uniqueness: -1.0, ..Default::default() },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn outlier_freedom_ratio() {
        let mut rows: Vec<Vec<CellValue>> = (0..98).map(|i| vec![num((i % 7) as f64)]).collect();
        rows.push(vec![num(1000.0)]);
        rows.push(vec![num(-1000.0)]);
        let ds = Dataset::new(vec![ColumnSchema::new("x", DType::Numeric)], rows, None).unwrap();
        let (score, flags) = outlier_freedom(&ds, "x", &OutlierMethod::Iqr { f: 1.5 }).unwrap();
        assert_eq!(flags.rows, vec![98, 99]);
        assert!((score - 0.98).abs() < 1e-12);
    }
}
