use std::collections::HashMap;

use indexmap::IndexMap;
use serde_json::Value;

use super::{require_numeric, resolve_columns, Diagnostics, ProcedureResult, ProcedureSpec, Target};
use crate::error::{DqiError, Result};
use crate::tabular::{quantile_r7, CellValue, DType, Dataset};

#[derive(Debug, Clone, PartialEq)]
pub enum ImputeMethod {
    Mean,
    Median,
    Mode,
    Constant(Value),
    /// Mean (numeric) or mode (otherwise) of the `k` nearest donor rows.
    Knn { k: usize },
    /// Ordinary least squares with an intercept.
    Linreg { predictors: Vec<String> },
}

pub(super) fn run(ds: &Dataset, target: &Target, method: &ImputeMethod, spec: ProcedureSpec) -> Result<ProcedureResult> {
    let columns = resolve_columns(ds, target, |i| ds.column(i).any(CellValue::is_missing))?;
    let mut rows = ds.rows().to_vec();
    let mut filled = IndexMap::new();
    let mut fallback_rows = 0;
    // Every column is imputed from the input snapshot, never from values
    // filled earlier in the same run.
    for idx in columns {
        let name = ds.columns()[idx].name.clone();
        let fills = column_fills(ds, idx, method, &mut fallback_rows)?;
        filled.insert(name, fills.len());
        for (r, cell) in fills {
            rows[r][idx] = cell;
        }
    }
    let output = ds.derive(ds.columns().to_vec(), rows, ds.label_column().map(str::to_string))?;
    let all_rows: Vec<usize> = (0..ds.row_count()).collect();
    let all_cols: Vec<usize> = (0..ds.column_count()).collect();
    Ok(ProcedureResult::build(
        spec,
        ds,
        output,
        &all_rows,
        &all_cols,
        Diagnostics::Impute { filled, fallback_rows },
    ))
}

fn column_fills(ds: &Dataset, idx: usize, method: &ImputeMethod, fallback_rows: &mut usize) -> Result<Vec<(usize, CellValue)>> {
    let schema = &ds.columns()[idx];
    let missing: Vec<usize> = ds.column(idx).enumerate().filter(|(_, c)| c.is_missing()).map(|(r, _)| r).collect();
    if missing.is_empty() {
        return Ok(Vec::new());
    }
    if missing.len() == ds.row_count() {
        return Err(DqiError::AllMissing(schema.name.clone()));
    }
    let constant = |cell: CellValue| Ok(missing.iter().map(|&r| (r, cell.clone())).collect());
    match method {
        ImputeMethod::Mean => {
            require_numeric(ds, idx)?;
            let values: Vec<f64> = ds.numeric_values(idx).into_iter().map(|(_, v)| v).collect();
            constant(CellValue::Number(values.iter().sum::<f64>() / values.len() as f64))
        }
        ImputeMethod::Median => {
            require_numeric(ds, idx)?;
            let mut values: Vec<f64> = ds.numeric_values(idx).into_iter().map(|(_, v)| v).collect();
            values.sort_by(f64::total_cmp);
            constant(CellValue::Number(quantile_r7(&values, 0.5)))
        }
        ImputeMethod::Mode => constant(mode(ds.column(idx).filter(|c| !c.is_missing())).expect("column has observed values")),
        ImputeMethod::Constant(v) => {
            let cell = crate::tabular::cell_from_json(v.clone(), schema.dtype)
                .filter(|c| !c.is_missing())
                .ok_or_else(|| DqiError::incompatible(&schema.name, format!("constant {v} does not fit {} dtype", schema.dtype.as_str())))?;
            constant(cell)
        }
        ImputeMethod::Knn { k } => knn_fills(ds, idx, *k, &missing),
        ImputeMethod::Linreg { predictors } => linreg_fills(ds, idx, predictors, &missing, fallback_rows),
    }
}

/// Most frequent value; the earliest first occurrence wins ties.
fn mode<'a>(cells: impl Iterator<Item = &'a CellValue>) -> Option<CellValue> {
    let mut counts: HashMap<&CellValue, (usize, usize)> = HashMap::new();
    for (order, cell) in cells.enumerate() {
        counts.entry(cell).or_insert((0, order)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(c, _)| c.clone())
}

fn knn_fills(ds: &Dataset, idx: usize, k: usize, missing: &[usize]) -> Result<Vec<(usize, CellValue)>> {
    if k == 0 {
        return Err(DqiError::spec("knn needs k >= 1"));
    }
    // (column, mean, stddev) for every numeric feature with spread.
    let features: Vec<(usize, f64, f64)> = (0..ds.column_count())
        .filter(|&c| c != idx && ds.columns()[c].dtype == DType::Numeric)
        .filter_map(|c| {
            let values: Vec<f64> = ds.numeric_values(c).into_iter().map(|(_, v)| v).collect();
            if values.len() < 2 {
                return None;
            }
            let (mean, sd) = crate::tabular::mean_and_stddev(&values);
            (sd > 0.0).then_some((c, mean, sd))
        })
        .collect();
    let z = |r: usize, c: usize, mean: f64, sd: f64| ds.rows()[r][c].as_f64().map(|v| (v - mean) / sd);
    let donors: Vec<usize> = (0..ds.row_count())
        .filter(|&r| !ds.rows()[r][idx].is_missing() && features.iter().all(|&(c, ..)| !ds.rows()[r][c].is_missing()))
        .collect();
    if donors.len() < k {
        return Err(DqiError::NotEnoughDonors { k, donors: donors.len() });
    }
    let numeric_target = ds.columns()[idx].dtype == DType::Numeric;
    let mut out = Vec::with_capacity(missing.len());
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(donors.len());
    for &r in missing {
        ranked.clear();
        for &d in &donors {
            let mut sq = 0.0;
            for &(c, mean, sd) in &features {
                // Features missing in the recipient are skipped.
                if let Some(zr) = z(r, c, mean, sd) {
                    let zd = z(d, c, mean, sd).expect("donors are complete");
                    sq += (zr - zd) * (zr - zd);
                }
            }
            ranked.push((sq.sqrt(), d));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < ranked.len() {
            ranked.select_nth_unstable_by(k - 1, cmp);
            ranked.truncate(k);
        }
        ranked.sort_by(cmp);
        let cell = if numeric_target {
            let sum: f64 = ranked.iter().map(|&(_, d)| ds.rows()[d][idx].as_f64().expect("numeric donor")).sum();
            CellValue::Number(sum / k as f64)
        } else {
            mode(ranked.iter().map(|&(_, d)| &ds.rows()[d][idx])).expect("k >= 1")
        };
        out.push((r, cell));
    }
    Ok(out)
}

fn linreg_fills(ds: &Dataset, idx: usize, predictors: &[String], missing: &[usize], fallback_rows: &mut usize) -> Result<Vec<(usize, CellValue)>> {
    require_numeric(ds, idx)?;
    if predictors.is_empty() {
        return Err(DqiError::spec("linreg needs at least one predictor"));
    }
    let mut pcols = Vec::with_capacity(predictors.len());
    for name in predictors {
        let c = ds.column_index(name)?;
        if c == idx {
            return Err(DqiError::spec("the imputed column cannot predict itself"));
        }
        require_numeric(ds, c)?;
        pcols.push(c);
    }
    let value = |r: usize, c: usize| ds.rows()[r][c].as_f64();
    let donors: Vec<usize> = (0..ds.row_count())
        .filter(|&r| value(r, idx).is_some() && pcols.iter().all(|&c| value(r, c).is_some()))
        .collect();
    if donors.is_empty() {
        return Err(DqiError::InsufficientData("linreg has no complete donor rows".into()));
    }
    let mut design: Vec<Vec<f64>> = vec![vec![1.0; donors.len()]];
    design.extend(pcols.iter().map(|&c| donors.iter().map(|&r| value(r, c).unwrap()).collect()));
    let y: Vec<f64> = donors.iter().map(|&r| value(r, idx).unwrap()).collect();
    let mut names = vec!["(intercept)".to_string()];
    names.extend(predictors.iter().cloned());
    let coef = least_squares(&design, &y, &names)?;
    let donor_mean = y.iter().sum::<f64>() / y.len() as f64;

    Ok(missing
        .iter()
        .map(|&r| {
            let xs: Option<Vec<f64>> = pcols.iter().map(|&c| value(r, c)).collect();
            let pred = match xs {
                Some(xs) => coef[0] + xs.iter().zip(&coef[1..]).map(|(x, b)| x * b).sum::<f64>(),
                None => {
                    *fallback_rows += 1;
                    donor_mean
                }
            };
            (r, CellValue::Number(pred))
        })
        .collect())
}

/// Least squares via modified Gram-Schmidt QR. `columns` holds the design
/// matrix column-major. A column whose residual after orthogonalization is
/// negligible relative to its norm makes the design singular.
pub(crate) fn least_squares(columns: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<Vec<f64>> {
    let p = columns.len();
    let mut q: Vec<Vec<f64>> = columns.to_vec();
    let mut r = vec![vec![0.0; p]; p];
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for j in 0..p {
        let original = norm(&columns[j]);
        for i in 0..j {
            let dot: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
            r[i][j] = dot;
            let qi = q[i].clone();
            for (x, qi) in q[j].iter_mut().zip(&qi) {
                *x -= dot * qi;
            }
        }
        let residual = norm(&q[j]);
        if original == 0.0 || residual <= 1e-9 * original {
            let mut involved: Vec<String> = (0..j)
                .filter(|&i| r[i][j].abs() > 1e-9 * original.max(1e-300))
                .map(|i| names[i].clone())
                .collect();
            involved.push(names[j].clone());
            return Err(DqiError::SingularDesign { columns: involved });
        }
        r[j][j] = residual;
        for x in q[j].iter_mut() {
            *x /= residual;
        }
    }
    let qty: Vec<f64> = q.iter().map(|qj| qj.iter().zip(y).map(|(a, b)| a * b).sum()).collect();
    let mut beta = vec![0.0; p];
    for j in (0..p).rev() {
        let s: f64 = ((j + 1)..p).map(|k| r[j][k] * beta[k]).sum();
        beta[j] = (qty[j] - s) / r[j][j];
    }
    Ok(beta)
}
