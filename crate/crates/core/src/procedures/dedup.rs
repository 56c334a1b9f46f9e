use std::collections::HashMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{resolve_columns, Diagnostics, ProcedureResult, ProcedureSpec, Target};
use crate::error::{DqiError, Result};
use crate::tabular::{CellValue, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DedupMode {
    /// Rows identical on every key column.
    Exact { key: Target },
    /// Rows whose mean similarity over the key columns is at least
    /// `threshold`, closed transitively. `All` keys on the text columns.
    Fuzzy { key: Target, threshold: f64 },
}

/// `1 - levenshtein(a, b) / max(len(a), len(b))`, counted in characters.
/// Two empty strings are identical.
pub fn levenshtein_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b)
}

fn cell_similarity(a: &CellValue, b: &CellValue) -> f64 {
    match (a.render(), b.render()) {
        (None, None) => 1.0,
        (Some(x), Some(y)) => levenshtein_similarity(&x, &y),
        _ => 0.0,
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    /// Keeps the smaller index as the root so each group is headed by its
    /// first row.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Duplicate groups (ascending rows, at least two members), ordered by
/// their first row.
pub(crate) fn duplicate_groups(ds: &Dataset, mode: &DedupMode) -> Result<Vec<Vec<usize>>> {
    let n = ds.row_count();
    let rows = ds.rows();
    let mut uf = UnionFind((0..n).collect());
    match mode {
        DedupMode::Exact { key } => {
            let cols = resolve_columns(ds, key, |_| true)?;
            let mut first: HashMap<Vec<&CellValue>, usize> = HashMap::new();
            for (r, row) in rows.iter().enumerate() {
                let k: Vec<&CellValue> = cols.iter().map(|&c| &row[c]).collect();
                let head = *first.entry(k).or_insert(r);
                uf.union(head, r);
            }
        }
        DedupMode::Fuzzy { key, threshold } => {
            let cols = resolve_columns(ds, key, |c| ds.columns()[c].dtype.is_textual())?;
            if cols.is_empty() {
                return Err(DqiError::spec("fuzzy dedup has no text key columns"));
            }
            for i in 0..n {
                for j in i + 1..n {
                    let sim = cols.iter().map(|&c| cell_similarity(&rows[i][c], &rows[j][c])).sum::<f64>() / cols.len() as f64;
                    if sim >= *threshold {
                        uf.union(i, j);
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..n {
        let root = uf.find(r);
        groups[root].push(r);
    }
    Ok(groups.into_iter().filter(|g| g.len() > 1).collect())
}

pub(super) fn run(ds: &Dataset, mode: &DedupMode, spec: ProcedureSpec) -> Result<ProcedureResult> {
    let groups = duplicate_groups(ds, mode)?;
    let mut drop = vec![false; ds.row_count()];
    for g in &groups {
        for &r in &g[1..] {
            drop[r] = true;
        }
    }
    let kept: Vec<usize> = (0..ds.row_count()).filter(|&r| !drop[r]).collect();
    let rows = kept.iter().map(|&r| ds.rows()[r].clone()).collect();
    let output = ds.derive(ds.columns().to_vec(), rows, ds.label_column().map(str::to_string))?;
    let all_cols: Vec<usize> = (0..ds.column_count()).collect();
    Ok(ProcedureResult::build(spec, ds, output, &kept, &all_cols, Diagnostics::Dedup { groups }))
}
