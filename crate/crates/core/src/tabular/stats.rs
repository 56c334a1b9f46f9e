use std::collections::HashMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{DType, Dataset};
use crate::error::Result;

pub const HISTOGRAM_BINS: usize = 20;
pub const TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Histogram {
    /// `bins + 1` ascending edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ValueCount {
    pub value: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ColumnStats {
    pub column: String,
    pub dtype: DType,
    pub row_count: usize,
    /// Observed (non-missing) cells.
    pub count: usize,
    pub missing_count: usize,
    pub distinct_count: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator); 0 for one value.
    pub stddev: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub quartiles: Option<[f64; 3]>,
    pub histogram: Option<Histogram>,
    /// Most frequent rendered values, ties in first-seen order.
    pub top_values: Vec<ValueCount>,
}

/// Quantile by linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and non-empty.
pub fn quantile_r7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub(crate) fn histogram(values: &[f64], min: f64, max: f64, bins: usize) -> Histogram {
    let width = (max - min) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { max } else { min + width * i as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let b = if width > 0.0 {
            (((v - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    Histogram { edges, counts }
}

pub fn column_stats(ds: &Dataset, column: &str) -> Result<ColumnStats> {
    let idx = ds.column_index(column)?;
    let dtype = ds.columns()[idx].dtype;
    let row_count = ds.row_count();

    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    let mut missing_count = 0;
    for (r, cell) in ds.column(idx).enumerate() {
        match cell.render() {
            None => missing_count += 1,
            Some(s) => counts.entry(s.into_owned()).or_insert((0, r)).0 += 1,
        }
    }
    let mut top: Vec<(String, usize, usize)> = counts.into_iter().map(|(v, (c, first))| (v, c, first)).collect();
    let distinct_count = top.len();
    top.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let top_values = top
        .into_iter()
        .take(TOP_K)
        .map(|(value, count, _)| ValueCount { value, count })
        .collect();

    let mut stats = ColumnStats {
        column: column.to_string(),
        dtype,
        row_count,
        count: row_count - missing_count,
        missing_count,
        distinct_count,
        mean: None,
        stddev: None,
        min: None,
        max: None,
        quartiles: None,
        histogram: None,
        top_values,
    };
    if dtype == DType::Numeric && stats.count > 0 {
        let mut values: Vec<f64> = ds.numeric_values(idx).into_iter().map(|(_, v)| v).collect();
        let (mean, sd) = mean_and_stddev(&values);
        values.sort_by(f64::total_cmp);
        let (min, max) = (values[0], values[values.len() - 1]);
        stats.mean = Some(mean);
        stats.stddev = Some(sd);
        stats.min = Some(min);
        stats.max = Some(max);
        stats.quartiles = Some([quantile_r7(&values, 0.25), quantile_r7(&values, 0.5), quantile_r7(&values, 0.75)]);
        stats.histogram = Some(histogram(&values, min, max, HISTOGRAM_BINS));
    }
    Ok(stats)
}
