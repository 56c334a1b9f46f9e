//! Independent reference implementations and seeded fixture generators.
//!
//! Every oracle here is written from the definitions directly, favouring
//! brute force over speed, and shares no code with the engine beyond its
//! data types. The acceptance harness in the service crate includes this
//! file as well.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dqi_core::procedures::{Family, ProcedureResult, ProcedureSpec, Target};
use dqi_core::tabular::{CellValue, ColumnSchema, DType, Dataset, DomainRule};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- cells

pub fn num(v: f64) -> CellValue {
    CellValue::Number(v)
}

pub fn text(s: &str) -> CellValue {
    CellValue::Text(s.to_string())
}

/// Exact cell equality from first principles: numbers by bit pattern,
/// Missing equal to Missing.
pub fn cells_equal(a: &CellValue, b: &CellValue) -> bool {
    match (a, b) {
        (CellValue::Missing, CellValue::Missing) => true,
        (CellValue::Number(x), CellValue::Number(y)) => x.to_bits() == y.to_bits(),
        (CellValue::Text(x), CellValue::Text(y)) => x == y,
        (CellValue::Boolean(x), CellValue::Boolean(y)) => x == y,
        (CellValue::Timestamp(x), CellValue::Timestamp(y)) => x == y,
        _ => false,
    }
}

pub fn rows_equal(a: &[CellValue], b: &[CellValue]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| cells_equal(x, y))
}

pub fn observed_numbers(ds: &Dataset, col: usize) -> Vec<f64> {
    ds.rows()
        .iter()
        .filter_map(|r| match r[col] {
            CellValue::Number(v) => Some(v),
            _ => None,
        })
        .collect()
}

// ---------------------------------------------------------------- KS

/// Largest ECDF gap, evaluating both right-continuous ECDFs at every
/// pooled sample point by counting.
pub fn ks_statistic_oracle(x: &[f64], y: &[f64]) -> f64 {
    let ecdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    x.iter()
        .chain(y)
        .map(|&t| (ecdf(x, t) - ecdf(y, t)).abs())
        .fold(0.0, f64::max)
}

fn neumaier_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Reference value of `2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`
/// with the same small-sample scaling of lambda, clamped to [0, 1].
///
/// For lambda >= 1 the alternating series is summed over 1000 terms with
/// compensated summation. Below 1 it converges too slowly, so the
/// equivalent Jacobi theta form
/// `1 - sqrt(2 pi) / lambda * sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 lambda^2))`
/// is used instead.
pub fn ks_pvalue_oracle(d: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let p = if lambda == 0.0 {
        1.0
    } else if lambda >= 1.0 {
        let series = neumaier_sum((1..=1000u32).map(|k| {
            let k = f64::from(k);
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * lambda * lambda).exp()
        }));
        2.0 * series
    } else {
        let pi = std::f64::consts::PI;
        let theta = neumaier_sum((1..=1000u32).map(|k| {
            let m = f64::from(2 * k - 1);
            (-(m * m) * pi * pi / (8.0 * lambda * lambda)).exp()
        }));
        1.0 - (2.0 * pi).sqrt() / lambda * theta
    };
    p.clamp(0.0, 1.0)
}

/// A random sample pair with many ties: values drawn from a coarse grid.
pub fn tied_sample_pair(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n1 = rng.random_range(1..=500);
    let n2 = rng.random_range(1..=500);
    let grid = rng.random_range(1..=40) as f64;
    let shift = rng.random_range(-5.0..5.0f64).round();
    let x = (0..n1).map(|_| (rng.random_range(0.0..grid)).floor()).collect();
    let y = (0..n2).map(|_| (rng.random_range(0.0..grid) + shift).floor()).collect();
    (x, y)
}

// ---------------------------------------------------------------- dimensions

pub fn completeness_oracle(ds: &Dataset, col: Option<usize>) -> f64 {
    let mut missing = 0usize;
    let mut total = 0usize;
    for row in ds.rows() {
        for (c, cell) in row.iter().enumerate() {
            if col.is_none_or(|k| k == c) {
                total += 1;
                if matches!(cell, CellValue::Missing) {
                    missing += 1;
                }
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        1.0 - missing as f64 / total as f64
    }
}

/// Groups of identical rows by O(n^2) pairwise comparison.
pub fn duplicate_groups_oracle(ds: &Dataset) -> Vec<Vec<usize>> {
    let rows = ds.rows();
    let mut assigned = vec![false; rows.len()];
    let mut groups = Vec::new();
    for i in 0..rows.len() {
        if assigned[i] {
            continue;
        }
        let mut g = vec![i];
        for j in i + 1..rows.len() {
            if !assigned[j] && rows_equal(&rows[i], &rows[j]) {
                assigned[j] = true;
                g.push(j);
            }
        }
        if g.len() > 1 {
            groups.push(g);
        }
    }
    groups
}

pub fn uniqueness_oracle(ds: &Dataset) -> f64 {
    let extra: usize = duplicate_groups_oracle(ds).iter().map(|g| g.len() - 1).sum();
    if ds.row_count() == 0 {
        1.0
    } else {
        1.0 - extra as f64 / ds.row_count() as f64
    }
}

/// Hand-written matcher for `YYYY-MM-DD` shapes (digits only, no range
/// check), mirroring the `iso_date` format id.
pub fn looks_like_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b.iter().enumerate().all(|(i, ch)| match i {
            4 | 7 => *ch == b'-',
            _ => ch.is_ascii_digit(),
        })
}

fn render(cell: &CellValue) -> Option<String> {
    match cell {
        CellValue::Missing => None,
        CellValue::Text(s) => Some(s.clone()),
        CellValue::Boolean(b) => Some(b.to_string()),
        CellValue::Number(v) => Some(format!("{v}")),
        CellValue::Timestamp(t) => Some(t.to_string()),
    }
}

/// Validity of one column of a [`quality_fixture`]: the share of observed
/// cells meeting every rule, with the violating rows. `None` when the
/// column declares nothing.
pub fn validity_oracle(ds: &Dataset, col: usize) -> Option<(f64, Vec<usize>)> {
    let schema = &ds.columns()[col];
    if schema.declared_format.is_none() && schema.domain_rule.is_none() {
        return None;
    }
    let mut observed = 0;
    let mut bad = Vec::new();
    for (r, row) in ds.rows().iter().enumerate() {
        let cell = &row[col];
        if matches!(cell, CellValue::Missing) {
            continue;
        }
        observed += 1;
        let format_ok = match schema.declared_format.as_deref() {
            None => true,
            Some("iso_date") => render(cell).is_some_and(|s| looks_like_iso_date(&s)),
            Some(other) => panic!("oracle does not know format {other}"),
        };
        let domain_ok = match &schema.domain_rule {
            None => true,
            Some(DomainRule::Range { min, max }) => matches!(cell, CellValue::Number(v) if *v >= *min && *v <= *max),
            Some(DomainRule::ValueSet { values }) => render(cell).is_some_and(|s| values.contains(&s)),
        };
        if !(format_ok && domain_ok) {
            bad.push(r);
        }
    }
    let ratio = if observed == 0 { 1.0 } else { 1.0 - bad.len() as f64 / observed as f64 };
    Some((ratio, bad))
}

/// A consistency predicate in structured form, alongside its rule text.
#[derive(Debug, Clone)]
pub enum Clause {
    /// Column-vs-column numeric comparison.
    Cols(String, &'static str, String),
    /// Column-vs-constant numeric comparison.
    Const(String, &'static str, f64),
    In(String, Vec<String>),
    Between(String, f64, f64),
}

impl Clause {
    pub fn text(&self) -> String {
        match self {
            Clause::Cols(a, op, b) => format!("{a} {op} {b}"),
            Clause::Const(a, op, v) => format!("{a} {op} {v}"),
            Clause::In(a, set) => format!("{a} in {{{}}}", set.iter().map(|s| format!("'{s}'")).collect::<Vec<_>>().join(", ")),
            Clause::Between(a, lo, hi) => format!("{a} between {lo} and {hi}"),
        }
    }

    fn columns(&self) -> Vec<&str> {
        match self {
            Clause::Cols(a, _, b) => vec![a, b],
            Clause::Const(a, ..) | Clause::In(a, _) | Clause::Between(a, ..) => vec![a],
        }
    }
}

fn compare(op: &str, a: f64, b: f64) -> bool {
    match op {
        "==" => a == b,
        "!=" => a != b,
        "<" => a < b,
        "<=" => a <= b,
        ">" => a > b,
        ">=" => a >= b,
        other => panic!("unknown operator {other}"),
    }
}

pub fn rule_text(clauses: &[Clause]) -> String {
    clauses.iter().map(Clause::text).collect::<Vec<_>>().join(" AND ")
}

/// Row-by-row interpreter: a rule counts for a row only if all of its
/// columns are observed there; rows with no such rule are left out.
pub fn consistency_oracle(ds: &Dataset, rules: &[Vec<Clause>]) -> Option<(f64, Vec<usize>)> {
    if rules.is_empty() {
        return None;
    }
    let idx = |name: &str| ds.columns().iter().position(|c| c.name == name).expect("known column");
    let number = |row: &[CellValue], name: &str| match &row[idx(name)] {
        CellValue::Number(v) => Some(*v),
        _ => None,
    };
    let mut evaluated = 0;
    let mut bad = Vec::new();
    for (r, row) in ds.rows().iter().enumerate() {
        let mut any = false;
        let mut ok = true;
        for rule in rules {
            let observed = rule.iter().flat_map(Clause::columns).all(|c| !matches!(row[idx(c)], CellValue::Missing));
            if !observed {
                continue;
            }
            any = true;
            let holds = rule.iter().all(|cl| match cl {
                Clause::Cols(a, op, b) => compare(op, number(row, a).unwrap(), number(row, b).unwrap()),
                Clause::Const(a, op, v) => compare(op, number(row, a).unwrap(), *v),
                Clause::In(a, set) => render(&row[idx(a)]).is_some_and(|s| set.contains(&s)),
                Clause::Between(a, lo, hi) => number(row, a).is_some_and(|v| v >= *lo && v <= *hi),
            });
            ok &= holds;
        }
        if any {
            evaluated += 1;
            if !ok {
                bad.push(r);
            }
        }
    }
    let ratio = if evaluated == 0 { 1.0 } else { 1.0 - bad.len() as f64 / evaluated as f64 };
    Some((ratio, bad))
}

/// Random table for the dimension checks: a ranged numeric column, a free
/// numeric column, a value-set category, an ISO-date-formatted text column
/// and a boolean, with missing cells and injected duplicate rows. Also
/// returns 0 to 3 random consistency rules.
pub fn quality_fixture(rng: &mut ChaCha8Rng) -> (Dataset, Vec<Vec<Clause>>) {
    let n = rng.random_range(0..=120);
    let p_missing = rng.random_range(0.0..0.3);
    let mut cols = vec![
        ColumnSchema::new("score", DType::Numeric),
        ColumnSchema::new("amount", DType::Numeric),
        ColumnSchema::new("grade", DType::Categorical),
        ColumnSchema::new("day", DType::Text),
        ColumnSchema::new("flag", DType::Boolean),
    ];
    cols[0].domain_rule = Some(DomainRule::Range { min: 0.0, max: 100.0 });
    if rng.random_bool(0.7) {
        cols[2].domain_rule = Some(DomainRule::ValueSet {
            values: vec!["A".into(), "B".into(), "C".into()],
        });
    }
    cols[3].declared_format = Some("iso_date".into());
    let grades = ["A", "B", "C", "D"];
    let days = ["2024-01-05", "2023-12-31", "2024/01/05", "24-1-5", "2024-1-05", "1999-07-14"];
    let mut rows: Vec<Vec<CellValue>> = Vec::with_capacity(n);
    for _ in 0..n {
        if !rows.is_empty() && rng.random_bool(0.15) {
            let src = rows[rng.random_range(0..rows.len())].clone();
            rows.push(src);
            continue;
        }
        let mut row = vec![
            num(rng.random_range(-20..=130) as f64),
            num((rng.random_range(0.0..50.0f64) * 4.0).round() / 4.0),
            text(grades[rng.random_range(0..grades.len())]),
            text(days[rng.random_range(0..days.len())]),
            CellValue::Boolean(rng.random_bool(0.5)),
        ];
        for cell in row.iter_mut() {
            if rng.random_bool(p_missing) {
                *cell = CellValue::Missing;
            }
        }
        rows.push(row);
    }
    let ds = Dataset::new(cols, rows, None).expect("valid fixture");

    let ops = ["==", "!=", "<", "<=", ">", ">="];
    let mut rules = Vec::new();
    for _ in 0..rng.random_range(0..=3) {
        let mut rule = Vec::new();
        for _ in 0..rng.random_range(1..=2) {
            let op = ops[rng.random_range(0..ops.len())];
            rule.push(match rng.random_range(0..4) {
                0 => Clause::Cols("score".into(), op, "amount".into()),
                1 => Clause::Const("amount".into(), op, rng.random_range(0..50) as f64),
                2 => Clause::In("grade".into(), vec!["A".into(), "B".into()]),
                _ => Clause::Between("score".into(), 10.0, 90.0),
            });
        }
        rules.push(rule);
    }
    (ds, rules)
}

// ---------------------------------------------------------------- procedures

/// Random mixed table for procedure properties: numeric columns with
/// missing cells, padded category strings, duplicates, and a label.
pub fn procedure_fixture(rng: &mut ChaCha8Rng, max_rows: usize) -> Dataset {
    let n = rng.random_range(3..=max_rows.max(3));
    let cols = vec![
        ColumnSchema::new("x1", DType::Numeric),
        ColumnSchema::new("x2", DType::Numeric),
        ColumnSchema::new("x3", DType::Numeric),
        ColumnSchema::new("city", DType::Categorical),
        ColumnSchema::new("y", DType::Categorical),
    ];
    let cities = ["Oslo", " Oslo", "Oslo ", "Rome", "rome", "  Lima  ", "Lima"];
    let mut rows: Vec<Vec<CellValue>> = Vec::with_capacity(n);
    for _ in 0..n {
        if !rows.is_empty() && rng.random_bool(0.1) {
            let src = rows[rng.random_range(0..rows.len())].clone();
            rows.push(src);
            continue;
        }
        let a: f64 = rng.random_range(-3.0..3.0);
        let mut row = vec![
            num((a * 8.0).round() / 8.0),
            num((2.0 * a + rng.random_range(-1.0..1.0f64)).round()),
            num(rng.random_range(0..5) as f64),
            text(cities[rng.random_range(0..cities.len())]),
            text(if a > 0.0 { "pos" } else { "neg" }),
        ];
        for cell in row.iter_mut().take(4) {
            if rng.random_bool(0.15) {
                *cell = CellValue::Missing;
            }
        }
        rows.push(row);
    }
    // Keep at least one observed value per numeric column.
    for c in 0..3 {
        if rows.iter().all(|r| matches!(r[c], CellValue::Missing)) {
            rows[0][c] = num(1.0);
        }
    }
    Dataset::new(cols, rows, Some("y".into())).expect("valid fixture")
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    };
    (mean, var.sqrt())
}

/// kNN imputation by exhaustive distance scan. Features are the other
/// numeric columns with nonzero spread, z-scored with column mean and
/// sample stddev; donors are rows observed on the target and every feature;
/// a recipient's missing features are ignored. Returns (row, fill) pairs.
pub fn knn_impute_oracle(ds: &Dataset, target: usize, k: usize) -> Vec<(usize, f64)> {
    let rows = ds.rows();
    let value = |r: usize, c: usize| match rows[r][c] {
        CellValue::Number(v) => Some(v),
        _ => None,
    };
    let mut features = Vec::new();
    for c in 0..ds.column_count() {
        if c == target || ds.columns()[c].dtype != DType::Numeric {
            continue;
        }
        let obs = observed_numbers(ds, c);
        if obs.len() < 2 {
            continue;
        }
        let (m, s) = mean_sd(&obs);
        if s > 0.0 {
            features.push((c, m, s));
        }
    }
    let donors: Vec<usize> = (0..rows.len())
        .filter(|&r| value(r, target).is_some() && features.iter().all(|&(c, ..)| value(r, c).is_some()))
        .collect();
    let mut out = Vec::new();
    for r in 0..rows.len() {
        if value(r, target).is_some() {
            continue;
        }
        let mut dist: Vec<(f64, usize)> = donors
            .iter()
            .map(|&d| {
                let mut sq = 0.0;
                for &(c, m, s) in &features {
                    if let Some(vr) = value(r, c) {
                        let diff = (vr - m) / s - (value(d, c).unwrap() - m) / s;
                        sq += diff * diff;
                    }
                }
                (sq.sqrt(), d)
            })
            .collect();
        dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let fill = dist[..k].iter().map(|&(_, d)| value(d, target).unwrap()).sum::<f64>() / k as f64;
        out.push((r, fill));
    }
    out
}

/// Character-level edit distance by the textbook dynamic programme.
pub fn levenshtein_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        dp[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = dp[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            dp[i][j] = sub.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
        }
    }
    dp[a.len()][b.len()]
}

pub fn similarity_oracle(a: &str, b: &str) -> f64 {
    let len = a.chars().count().max(b.chars().count());
    if len == 0 {
        1.0
    } else {
        1.0 - levenshtein_oracle(a, b) as f64 / len as f64
    }
}

/// Fuzzy duplicate groups: pairwise mean similarity over the key columns,
/// closed transitively by repeated merging until nothing changes.
pub fn fuzzy_groups_oracle(ds: &Dataset, keys: &[usize], threshold: f64) -> Vec<Vec<usize>> {
    let n = ds.row_count();
    let rows = ds.rows();
    let sim = |i: usize, j: usize| {
        keys.iter()
            .map(|&c| match (render(&rows[i][c]), render(&rows[j][c])) {
                (None, None) => 1.0,
                (Some(a), Some(b)) => similarity_oracle(&a, &b),
                _ => 0.0,
            })
            .sum::<f64>()
            / keys.len() as f64
    };
    let mut label: Vec<usize> = (0..n).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for j in i + 1..n {
                if label[i] != label[j] && sim(i, j) >= threshold {
                    let (keep, gone) = (label[i].min(label[j]), label[i].max(label[j]));
                    for l in label.iter_mut() {
                        if *l == gone {
                            *l = keep;
                        }
                    }
                    changed = true;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, l) in label.into_iter().enumerate() {
        groups.entry(l).or_default().push(r);
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

/// Noisy name strings for fuzzy dedup: a few base names with random
/// single-character edits.
pub fn names_fixture(rng: &mut ChaCha8Rng, n: usize) -> Dataset {
    let bases = ["jonathan smith", "maria garcia", "li wei", "olga petrova", "ahmed khan", "ana"];
    let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyz ".chars().collect();
    let rows = (0..n)
        .map(|_| {
            let mut s: Vec<char> = bases[rng.random_range(0..bases.len())].chars().collect();
            for _ in 0..rng.random_range(0..=3) {
                let pos = rng.random_range(0..=s.len());
                match rng.random_range(0..3) {
                    0 => s.insert(pos, alphabet[rng.random_range(0..alphabet.len())]),
                    1 if pos < s.len() => {
                        s.remove(pos);
                    }
                    _ if pos < s.len() => s[pos] = alphabet[rng.random_range(0..alphabet.len())],
                    _ => {}
                }
            }
            if s.iter().all(|c| *c == ' ') {
                s = vec!['a'];
            }
            let city = if rng.random_bool(0.1) { CellValue::Missing } else { text(["x", "y"][rng.random_range(0..2)]) };
            vec![CellValue::Text(s.into_iter().collect()), city]
        })
        .collect();
    Dataset::new(vec![ColumnSchema::new("name", DType::Text), ColumnSchema::new("city", DType::Categorical)], rows, None).unwrap()
}

/// Textbook local outlier factor on a 1-D sample from all pairwise
/// distances. The k-distance neighbourhood includes every point at or
/// within the k-distance, so it may exceed k on ties.
pub fn lof_oracle(values: &[f64], k: usize) -> Vec<f64> {
    let n = values.len();
    let dist = |i: usize, j: usize| (values[i] - values[j]).abs();
    let kdist: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist(i, j)).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d[k - 1]
        })
        .collect();
    let neigh: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| j != i && dist(i, j) <= kdist[i]).collect()).collect();
    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let reach: f64 = neigh[i].iter().map(|&j| kdist[j].max(dist(i, j))).sum();
            neigh[i].len() as f64 / reach
        })
        .collect();
    (0..n)
        .map(|i| neigh[i].iter().map(|&j| lrd[j]).sum::<f64>() / (neigh[i].len() as f64 * lrd[i]))
        .collect()
}

/// Quantile by linear interpolation between order statistics
/// (`h = (n - 1) p`).
pub fn quantile_oracle(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mutual information in bits from a dense joint histogram, as
/// `H(X) + H(Y) - H(X, Y)`.
pub fn mutual_information_oracle(x: &[usize], y: &[usize]) -> f64 {
    let n = x.len() as f64;
    let kx = x.iter().max().map_or(0, |m| m + 1);
    let ky = y.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![vec![0usize; ky]; kx];
    for (&a, &b) in x.iter().zip(y) {
        joint[a][b] += 1;
    }
    let h = |counts: &mut dyn Iterator<Item = usize>| -> f64 {
        counts
            .filter(|&c| c > 0)
            .map(|c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum()
    };
    let hx = h(&mut joint.iter().map(|r| r.iter().sum()));
    let hy = h(&mut (0..ky).map(|b| joint.iter().map(|r| r[b]).sum()));
    let hxy = h(&mut joint.iter().flatten().copied());
    (hx + hy - hxy).max(0.0)
}

/// Equal-frequency bin of each value: the count of inner quantile edges
/// strictly below it.
pub fn equal_frequency_bins_oracle(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let edges: Vec<f64> = (1..bins).map(|i| quantile_oracle(&sorted, i as f64 / bins as f64)).collect();
    values.iter().map(|v| edges.iter().filter(|e| *e < v).count()).collect()
}

// ---------------------------------------------------------------- learners

/// Regularized mean logistic loss, written out directly.
pub fn logistic_loss_oracle(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.len() as f64;
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &t)| {
            let z: f64 = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
            let p = 1.0 / (1.0 + (-z).exp());
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Central finite-difference gradient of `f` at `(w, b)`.
pub fn finite_difference_gradient(f: impl Fn(&[f64], f64) -> f64, w: &[f64], b: f64, eps: f64) -> (Vec<f64>, f64) {
    let gw = (0..w.len())
        .map(|i| {
            let mut hi = w.to_vec();
            let mut lo = w.to_vec();
            hi[i] += eps;
            lo[i] -= eps;
            (f(&hi, b) - f(&lo, b)) / (2.0 * eps)
        })
        .collect();
    let gb = (f(w, b + eps) - f(w, b - eps)) / (2.0 * eps);
    (gw, gb)
}

/// Norm-wise relative error between two gradient vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(b.iter().map(|v| v * v).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
}

/// Best Gini split by enumerating every feature and every midpoint
/// between sorted distinct values, recounting both children from scratch.
/// Returns `(feature, left rows, weighted impurity)`, preferring the lowest
/// feature and then the lowest threshold among equal impurities.
pub fn cart_split_oracle(x: &[Vec<f64>], y: &[usize], classes: usize) -> Option<(usize, Vec<usize>, f64)> {
    let n = x.len();
    let mut best: Option<(usize, Vec<usize>, f64)> = None;
    for f in 0..x[0].len() {
        let mut distinct: Vec<f64> = x.iter().map(|r| r[f]).collect();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        for w in distinct.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<usize> = (0..n).filter(|&i| x[i][f] <= t).collect();
            let mut lc = vec![0; classes];
            let mut rc = vec![0; classes];
            for i in 0..n {
                if x[i][f] <= t {
                    lc[y[i]] += 1;
                } else {
                    rc[y[i]] += 1;
                }
            }
            let nl = left.len() as f64;
            let imp = (nl * gini(&lc) + (n as f64 - nl) * gini(&rc)) / n as f64;
            if best.as_ref().is_none_or(|b| imp < b.2 - 1e-12) {
                best = Some((f, left, imp));
            }
        }
    }
    best
}

/// k-nearest-neighbour vote by sorting every training row by distance.
pub fn knn_predict_oracle(train: &[Vec<f64>], y: &[usize], classes: usize, query: &[f64], k: usize) -> usize {
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut votes = vec![0; classes];
    for &(_, i) in &d[..k] {
        votes[y[i]] += 1;
    }
    let top = *votes.iter().max().unwrap();
    votes.iter().position(|&v| v == top).unwrap()
}

/// Accuracy and macro precision/recall/F1 from a confusion matrix
/// (`m[true][pred]`), averaging over classes that occur in truth or
/// prediction.
pub fn metrics_oracle(m: &[Vec<usize>]) -> BTreeMap<&'static str, f64> {
    let k = m.len();
    let total: usize = m.iter().flatten().sum();
    let correct: usize = (0..k).map(|i| m[i][i]).sum();
    let (mut p, mut r, mut f, mut used) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..k {
        let tp = m[c][c] as f64;
        let actual: usize = m[c].iter().sum();
        let predicted: usize = (0..k).map(|i| m[i][c]).sum();
        if actual == 0 && predicted == 0 {
            continue;
        }
        used += 1.0;
        let prec = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let rec = if actual == 0 { 0.0 } else { tp / actual as f64 };
        p += prec;
        r += rec;
        f += if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
    }
    BTreeMap::from([
        ("accuracy", correct as f64 / total as f64),
        ("precision", p / used),
        ("recall", r / used),
        ("f1", f / used),
    ])
}

/// Two Gaussian blobs in `d` dimensions with integer-ish coordinates so
/// split ties occur.
pub fn blobs(rng: &mut ChaCha8Rng, n: usize, d: usize, classes: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        x.push((0..d).map(|j| (c as f64 * (j as f64 + 1.0) + rng.random_range(-2.0..2.0f64)).round()).collect());
        y.push(c);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    (order.iter().map(|&i| x[i].clone()).collect(), order.iter().map(|&i| y[i]).collect())
}

/// Three-class table from [`blobs`] with 3% missing features, a nuisance
/// category and label `y`.
pub fn classification_table(r: &mut ChaCha8Rng, n: usize) -> Dataset {
    let (x, y) = blobs(r, n, 3, 3);
    let mut cols: Vec<ColumnSchema> = (0..3).map(|j| ColumnSchema::new(format!("f{j}"), DType::Numeric)).collect();
    cols.push(ColumnSchema::new("colour", DType::Categorical));
    cols.push(ColumnSchema::new("y", DType::Categorical));
    let rows = x
        .iter()
        .zip(&y)
        .map(|(row, &c)| {
            let mut out: Vec<CellValue> = row.iter().map(|&v| if r.random_bool(0.03) { CellValue::Missing } else { num(v) }).collect();
            out.push(text(["red", "green"][usize::from(r.random_bool(0.5))]));
            out.push(text(&format!("k{c}")));
            out
        })
        .collect();
    Dataset::new(cols, rows, Some("y".into())).unwrap()
}

// ---------------------------------------------------------------- procedure laws

/// Every spec family with parameters that make sense on a
/// [`procedure_fixture`].
pub fn fixture_specs(ds: &Dataset) -> Vec<ProcedureSpec> {
    let mut specs = vec![
        ProcedureSpec::new(Family::Impute, "mean").on(&["x1"]),
        ProcedureSpec::new(Family::Impute, "median").on(&["x2"]),
        ProcedureSpec::new(Family::Impute, "mode").on(&["city"]),
        ProcedureSpec::new(Family::Impute, "constant").on(&["x3"]).param("value", 0),
        ProcedureSpec::new(Family::Impute, "knn").on(&["x1"]).param("k", 2),
        ProcedureSpec::new(Family::Outlier, "iqr").on(&["x2"]).param("action", "to_missing"),
        ProcedureSpec::new(Family::Outlier, "zscore").on(&["x1"]).param("t", 1.5).param("action", "clip_to_fence"),
        ProcedureSpec::new(Family::Outlier, "iqr").on(&["x3"]).param("f", 0.2).param("action", "remove_rows"),
        ProcedureSpec::new(Family::Delete, "rows_with_missing").on(&["x1", "city"]),
        ProcedureSpec::new(Family::Delete, "rows_by_index").param("indices", json!([0, 2])),
        ProcedureSpec::new(Family::Delete, "column").on(&["x3"]),
        ProcedureSpec::new(Family::Standardize, "trim_whitespace").on(&["city"]),
        ProcedureSpec::new(Family::Standardize, "case_fold").on(&["city"]).param("case", "upper"),
        ProcedureSpec::new(Family::Standardize, "map_values").on(&["city"]).param("dictionary", json!({"rome": "Rome"})),
        ProcedureSpec::new(Family::Dedup, "exact"),
        ProcedureSpec::new(Family::Dedup, "fuzzy").on(&["city"]).param("threshold", 0.8),
        ProcedureSpec::new(Family::FeatureSelect, "variance_threshold").param("t", 0.5),
        ProcedureSpec::new(Family::FeatureSelect, "correlation_filter").param("r_max", 0.8),
        ProcedureSpec::new(Family::FeatureSelect, "mutual_info_topk").param("k", 2),
    ];
    if ds.row_count() > 20 {
        specs.push(ProcedureSpec::new(Family::Outlier, "lof").on(&["x1"]).param("k", 5).param("action", "to_missing"));
    }
    specs
}

/// Engine refusals that depend on the data rather than on a bug.
pub fn is_data_refusal(code: &str) -> bool {
    matches!(code, "empty_result" | "not_enough_donors" | "insufficient_data" | "all_missing" | "invalid_spec")
}

/// Bookkeeping every result must satisfy: conservation of rows and columns
/// and an untouched input.
pub fn check_result(ds: &Dataset, res: &ProcedureResult) -> Result<(), String> {
    let out = &res.output;
    if res.input_snapshot != *ds.snapshot_id() {
        return Err("input snapshot id not recorded".into());
    }
    if ds.row_count() != out.row_count() + res.rows_removed {
        return Err(format!("row conservation: {} != {} + {}", ds.row_count(), out.row_count(), res.rows_removed));
    }
    if ds.column_count() != out.column_count() + res.cols_removed {
        return Err(format!("column conservation: {} != {} + {}", ds.column_count(), out.column_count(), res.cols_removed));
    }
    // Rebuilding the input from its parts gives the same hash only if the
    // procedure left it alone.
    let rebuilt = Dataset::new(ds.columns().to_vec(), ds.rows().to_vec(), ds.label_column().map(str::to_string)).map_err(|e| e.to_string())?;
    if rebuilt.snapshot_id() != ds.snapshot_id() {
        return Err("input was modified".into());
    }
    Ok(())
}

/// Maps each output row to its input row for procedures that only drop
/// rows, by greedy in-order matching.
pub fn surviving_rows(ds: &Dataset, out: &Dataset, cols: &[usize]) -> Option<Vec<usize>> {
    let mut map = Vec::with_capacity(out.row_count());
    let mut next = 0;
    for orow in out.rows() {
        let found = (next..ds.row_count()).find(|&r| cols.iter().enumerate().all(|(j, &c)| cells_equal(&orow[j], &ds.rows()[r][c])))?;
        map.push(found);
        next = found + 1;
    }
    Some(map)
}

/// Locality and completeness coupling for imputation, shape preservation
/// for standardization, and value preservation for row removal.
pub fn check_family_laws(ds: &Dataset, spec: &ProcedureSpec, res: &ProcedureResult) -> Result<(), String> {
    let out = &res.output;
    let all: Vec<usize> = (0..ds.column_count()).collect();
    match spec.family {
        Family::Impute => {
            let Target::Columns(targets) = &spec.target else {
                return Err("impute specs in the fixture name their target".into());
            };
            let t = ds.column_index(&targets[0]).map_err(|e| e.to_string())?;
            let mut changed = 0;
            for (r, (a, b)) in ds.rows().iter().zip(out.rows()).enumerate() {
                for c in 0..ds.column_count() {
                    if !cells_equal(&a[c], &b[c]) {
                        if c != t || !matches!(a[c], CellValue::Missing) {
                            return Err(format!("locality: impute touched row {r} column {c}"));
                        }
                        changed += 1;
                    }
                }
            }
            if changed != res.cells_changed {
                return Err(format!("cells_changed {} but {changed} cells differ", res.cells_changed));
            }
            let missing_after = out.rows().iter().filter(|row| matches!(row[t], CellValue::Missing)).count();
            if missing_after != 0 {
                return Err(format!("completeness coupling: {missing_after} cells still missing"));
            }
        }
        Family::Standardize => {
            if out.row_count() != ds.row_count() || out.column_count() != ds.column_count() {
                return Err("standardization changed the shape".into());
            }
        }
        Family::Dedup | Family::Delete if spec.method != "column" => {
            if surviving_rows(ds, out, &all).is_none() {
                return Err("surviving rows do not keep their values".into());
            }
        }
        _ => {}
    }
    Ok(())
}
