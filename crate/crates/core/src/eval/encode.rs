use crate::tabular::{mean_and_stddev, CellValue, DType, Dataset};

#[derive(Debug, Clone, PartialEq)]
enum Feature {
    /// Numeric, boolean and timestamp columns: `(x - mean) / scale`.
    Scaled { column: usize, mean: f64, scale: f64 },
    /// One indicator per category seen in training, sorted; unseen
    /// categories encode as all zeros.
    OneHot { column: usize, categories: Vec<String> },
}

/// Feature encoder fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    features: Vec<Feature>,
}

impl Encoder {
    /// `rows` must have every column in `columns` observed.
    pub fn fit(ds: &Dataset, rows: &[usize], columns: &[usize]) -> Encoder {
        let features = columns
            .iter()
            .map(|&c| match ds.columns()[c].dtype {
                DType::Categorical | DType::Text => {
                    let mut categories: Vec<String> = rows
                        .iter()
                        .filter_map(|&r| ds.rows()[r][c].render().map(|s| s.into_owned()))
                        .collect();
                    categories.sort();
                    categories.dedup();
                    Feature::OneHot { column: c, categories }
                }
                _ => {
                    let values: Vec<f64> = rows.iter().filter_map(|&r| ds.rows()[r][c].as_f64()).collect();
                    let (mean, sd) = if values.is_empty() { (0.0, 0.0) } else { mean_and_stddev(&values) };
                    Feature::Scaled {
                        column: c,
                        mean,
                        scale: if sd > 0.0 { sd } else { 1.0 },
                    }
                }
            })
            .collect();
        Encoder { features }
    }

    pub fn width(&self) -> usize {
        self.features
            .iter()
            .map(|f| match f {
                Feature::Scaled { .. } => 1,
                Feature::OneHot { categories, .. } => categories.len(),
            })
            .sum()
    }

    /// Fitted centre of each scaled feature, in column order; `None` for
    /// one-hot features.
    pub fn means(&self) -> Vec<Option<f64>> {
        self.features
            .iter()
            .map(|f| match f {
                Feature::Scaled { mean, .. } => Some(*mean),
                Feature::OneHot { .. } => None,
            })
            .collect()
    }

    pub fn encode_row(&self, row: &[CellValue]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        for f in &self.features {
            match f {
                Feature::Scaled { column, mean, scale } => {
                    out.push(row[*column].as_f64().map_or(0.0, |v| (v - mean) / scale));
                }
                Feature::OneHot { column, categories } => {
                    let value = row[*column].render();
                    out.extend(categories.iter().map(|c| f64::from(u8::from(value.as_deref() == Some(c.as_str())))));
                }
            }
        }
        out
    }

    pub fn transform(&self, ds: &Dataset, rows: &[usize]) -> Vec<Vec<f64>> {
        rows.iter().map(|&r| self.encode_row(&ds.rows()[r])).collect()
    }
}
