mod support;

use dqi_core::procedures::{
    detect_outliers, equal_frequency_bins, lof_scores, mutual_information_bits, run_spec, Diagnostics, Family, OutlierMethod,
    ProcedureSpec,
};
use dqi_core::tabular::{CellValue, ColumnSchema, DType, Dataset};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use support::*;

#[test]
fn invariants_hold_on_randomized_fixtures() {
    let mut r = rng(200);
    let mut applied = 0;
    for _ in 0..200 {
        let ds = procedure_fixture(&mut r, 60);
        for spec in fixture_specs(&ds) {
            match run_spec(&ds, &spec) {
                Ok(res) => {
                    if let Err(e) = check_result(&ds, &res).and_then(|_| check_family_laws(&ds, &spec, &res)) {
                        panic!("{spec:?}: {e}");
                    }
                    applied += 1;
                }
                Err(e) => {
                    // Only data-dependent refusals are acceptable here.
                    assert!(is_data_refusal(e.code()), "{spec:?}: {e}");
                }
            }
        }
    }
    assert!(applied > 3000, "only {applied} applications succeeded");
}

#[test]
fn idempotence() {
    let mut r = rng(201);
    for _ in 0..200 {
        let ds = procedure_fixture(&mut r, 60);
        for spec in [
            ProcedureSpec::new(Family::Dedup, "exact"),
            ProcedureSpec::new(Family::Standardize, "trim_whitespace").on(&["city"]),
        ] {
            let once = run_spec(&ds, &spec).unwrap();
            let twice = run_spec(&once.output, &spec).unwrap();
            assert_eq!(twice.output.snapshot_id(), once.output.snapshot_id());
            assert_eq!(twice.cells_changed + twice.rows_removed, 0);
        }
        let full = run_spec(&ds, &ProcedureSpec::new(Family::Impute, "mean").on(&["x1"])).unwrap().output;
        let noop = run_spec(&full, &ProcedureSpec::new(Family::Impute, "median").on(&["x1"])).unwrap();
        assert_eq!(noop.cells_changed, 0);
        assert_eq!(noop.output.snapshot_id(), full.snapshot_id());
    }
}

#[test]
fn knn_imputation_equals_exhaustive_scan() {
    let mut r = rng(202);
    let mut checked = 0;
    for _ in 0..120 {
        let ds = procedure_fixture(&mut r, 100);
        let k = r.random_range(1..=4);
        for target in ["x1", "x2"] {
            let spec = ProcedureSpec::new(Family::Impute, "knn").on(&[target]).param("k", k);
            let Ok(res) = run_spec(&ds, &spec) else { continue };
            let t = ds.column_index(target).unwrap();
            for (row, want) in knn_impute_oracle(&ds, t, k) {
                let got = res.output.rows()[row][t].as_f64().unwrap();
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "row {row}: {got} vs {want}");
                checked += 1;
            }
        }
    }
    assert!(checked > 500);
}

#[test]
fn fuzzy_dedup_equals_union_find_oracle() {
    let mut r = rng(203);
    for _ in 0..60 {
        let n = r.random_range(2..=100);
        let ds = names_fixture(&mut r, n);
        let threshold = [0.6, 0.75, 0.8, 0.9, 1.0][r.random_range(0..5)];
        let keys: &[&str] = if r.random_bool(0.5) { &["name"] } else { &["name", "city"] };
        let spec = ProcedureSpec::new(Family::Dedup, "fuzzy").on(keys).param("threshold", threshold);
        let res = run_spec(&ds, &spec).unwrap();
        let key_idx: Vec<usize> = keys.iter().map(|k| ds.column_index(k).unwrap()).collect();
        let want = fuzzy_groups_oracle(&ds, &key_idx, threshold);
        match &res.diagnostics {
            Diagnostics::Dedup { groups } => assert_eq!(groups, &want),
            other => panic!("{other:?}"),
        }
        let removed: usize = want.iter().map(|g| g.len() - 1).sum();
        assert_eq!(res.rows_removed, removed);
    }
}

#[test]
fn fuzzy_threshold_one_is_exact_match() {
    let mut r = rng(204);
    for _ in 0..30 {
        let ds = names_fixture(&mut r, 60);
        let fuzzy = run_spec(&ds, &ProcedureSpec::new(Family::Dedup, "fuzzy").on(&["name", "city"]).param("threshold", 1.0)).unwrap();
        let exact = run_spec(&ds, &ProcedureSpec::new(Family::Dedup, "exact").on(&["name", "city"])).unwrap();
        assert_eq!(fuzzy.output.snapshot_id(), exact.output.snapshot_id());
    }
}

#[test]
fn lof_matches_pairwise_oracle_on_continuous_samples() {
    let mut r = rng(205);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..30 {
        let mut values: Vec<f64> = (0..50).map(|_| normal.sample(&mut r)).collect();
        values.push(6.0);
        let k = r.random_range(2..=20);
        let got = lof_scores(&values, k);
        let want = lof_oracle(&values, k);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{g} vs {w}");
        }
        let rows = values.iter().map(|&v| vec![CellValue::Number(v)]).collect();
        let ds = Dataset::new(vec![ColumnSchema::new("v", DType::Numeric)], rows, None).unwrap();
        let flags = detect_outliers(&ds, "v", &OutlierMethod::Lof { k, threshold: 1.5 }).unwrap();
        let expect: Vec<usize> = (0..values.len()).filter(|&i| want[i] > 1.5).collect();
        assert_eq!(flags.rows, expect);
    }
}

#[test]
fn mutual_information_matches_joint_histogram() {
    let mut r = rng(206);
    for _ in 0..50 {
        let n = 200;
        let x: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0f64).round()).collect();
        let y: Vec<usize> = x.iter().map(|v| usize::from(*v + r.random_range(-3.0..3.0) > 5.0)).collect();
        let bins = equal_frequency_bins(&x, 10);
        assert_eq!(bins, equal_frequency_bins_oracle(&x, 10));
        let got = mutual_information_bits(&bins, &y);
        assert!((got - mutual_information_oracle(&bins, &y)).abs() < 1e-12);
    }
}

#[test]
fn mutual_info_topk_keeps_oracle_ranking() {
    let mut r = rng(207);
    for _ in 0..20 {
        let n = 200;
        let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| r.random_range(0.0..1.0)).collect()).collect();
        let label: Vec<usize> = (0..n).map(|i| usize::from(cols[0][i] + 0.5 * cols[1][i] + r.random_range(0.0..0.3) > 0.9)).collect();
        let mut schema: Vec<ColumnSchema> = (0..4).map(|c| ColumnSchema::new(format!("f{c}"), DType::Numeric)).collect();
        schema.push(ColumnSchema::new("y", DType::Categorical));
        let rows = (0..n)
            .map(|i| {
                let mut row: Vec<CellValue> = cols.iter().map(|c| CellValue::Number(c[i])).collect();
                row.push(CellValue::Text(format!("c{}", label[i])));
                row
            })
            .collect();
        let ds = Dataset::new(schema, rows, Some("y".into())).unwrap();
        let res = run_spec(&ds, &ProcedureSpec::new(Family::FeatureSelect, "mutual_info_topk").param("k", 2)).unwrap();
        // The label codes follow first appearance.
        let first = label[0];
        let y_codes: Vec<usize> = label.iter().map(|&l| usize::from(l != first)).collect();
        let mut mi: Vec<(f64, usize)> = cols
            .iter()
            .enumerate()
            .map(|(c, v)| (mutual_information_oracle(&equal_frequency_bins_oracle(v, 10), &y_codes), c))
            .collect();
        mi.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut keep: Vec<String> = mi[..2].iter().map(|&(_, c)| format!("f{c}")).collect();
        keep.sort();
        match &res.diagnostics {
            Diagnostics::FeatureSelect { kept, scores, .. } => {
                let mut kept = kept.clone();
                kept.sort();
                assert_eq!(kept, keep);
                for &(v, c) in &mi {
                    assert!((scores[&format!("f{c}")] - v).abs() < 1e-12);
                }
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn listwise_deletion_equals_row_filter() {
    let mut r = rng(208);
    for _ in 0..100 {
        let ds = procedure_fixture(&mut r, 60);
        let cols = ["x1", "x2", "city"];
        let idx: Vec<usize> = cols.iter().map(|c| ds.column_index(c).unwrap()).collect();
        let keep: Vec<usize> = (0..ds.row_count())
            .filter(|&row| idx.iter().all(|&c| !matches!(ds.rows()[row][c], CellValue::Missing)))
            .collect();
        match run_spec(&ds, &ProcedureSpec::new(Family::Delete, "rows_with_missing").on(&cols)) {
            Ok(res) => {
                assert_eq!(res.output.row_count(), keep.len());
                for (o, &i) in res.output.rows().iter().zip(&keep) {
                    assert!(rows_equal(o, &ds.rows()[i]));
                }
            }
            Err(e) => assert!(keep.is_empty() && e.code() == "empty_result"),
        }
    }
}

#[test]
fn documented_examples() {
    let n = |v: f64| CellValue::Number(v);
    let one = |cells: Vec<CellValue>, dtype| Dataset::new(vec![ColumnSchema::new("v", dtype)], cells.into_iter().map(|c| vec![c]).collect(), None).unwrap();

    let ds = one(vec![n(1.0), CellValue::Missing, n(3.0)], DType::Numeric);
    let res = run_spec(&ds, &ProcedureSpec::new(Family::Impute, "mean").on(&["v"])).unwrap();
    assert_eq!(res.output.rows()[1][0], n(2.0));

    let t = |s: &str| CellValue::Text(s.into());
    let ds = one(vec![t("a"), t("a"), t("b"), CellValue::Missing], DType::Categorical);
    let res = run_spec(&ds, &ProcedureSpec::new(Family::Impute, "mode").on(&["v"])).unwrap();
    assert_eq!(res.output.rows()[3][0], t("a"));

    let ds = one(vec![n(1.0), n(1.0), n(1.0), n(1.0), n(100.0)], DType::Numeric);
    let flags = detect_outliers(&ds, "v", &OutlierMethod::Iqr { f: 1.5 }).unwrap();
    assert_eq!(flags.rows, vec![4]);
    let clip = run_spec(&ds, &ProcedureSpec::new(Family::Outlier, "iqr").on(&["v"]).param("action", "clip_to_fence")).unwrap();
    assert_eq!(clip.output.rows()[4][0], n(1.0));
    let gone = run_spec(&ds, &ProcedureSpec::new(Family::Outlier, "iqr").on(&["v"]).param("action", "remove_rows")).unwrap();
    assert_eq!(gone.rows_removed, 1);

    let ds = one(vec![t("31/01/2020"), t("01/02/2021")], DType::Categorical);
    let res = run_spec(&ds, &ProcedureSpec::new(Family::Standardize, "date_to_iso").on(&["v"]).param("pattern", "DD/MM/YYYY")).unwrap();
    assert_eq!(res.output.columns()[0].dtype, DType::Timestamp);
    assert_eq!(res.output.rows()[0][0].render().unwrap(), "2020-01-31");
}

#[test]
fn numeric_unseparate_converts_exactly_the_parseable_subset() {
    // Independent parser: optional sign, 1-3 leading digits, groups of
    // exactly three after each comma, optional '.' and digits.
    fn oracle(s: &str) -> Option<f64> {
        let body = s.strip_prefix('-').unwrap_or(s);
        let (int, frac) = match body.split_once('.') {
            Some((i, f)) if !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()) => (i, Some(f)),
            Some(_) => return None,
            None => (body, None),
        };
        let groups: Vec<&str> = int.split(',').collect();
        let ok_first = !groups[0].is_empty() && groups[0].len() <= 3 && groups[0].bytes().all(|b| b.is_ascii_digit());
        let ok_rest = groups[1..].iter().all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit()));
        if !(ok_first && ok_rest) || (groups.len() == 1 && groups[0].len() > 3) {
            return None;
        }
        let digits: String = groups.concat();
        let text = match frac {
            Some(f) => format!("{digits}.{f}"),
            None => digits,
        };
        let v: f64 = text.parse().ok()?;
        Some(if s.starts_with('-') { -v } else { v })
    }
    let mut r = rng(209);
    let pool = ["1,234.5", "12", "1,234,567", "12,34", "1.234,5", "abc", "-3,000.25", "999", "1,2345", ",123", "7.", "0.5", "123,456.789"];
    let cells: Vec<String> = (0..100).map(|_| pool[r.random_range(0..pool.len())].to_string()).collect();
    let rows = cells.iter().map(|s| vec![CellValue::Text(s.clone())]).collect();
    let ds = Dataset::new(vec![ColumnSchema::new("v", DType::Categorical)], rows, None).unwrap();
    let res = run_spec(&ds, &ProcedureSpec::new(Family::Standardize, "numeric_unseparate").on(&["v"])).unwrap();
    let converted: Vec<bool> = cells.iter().map(|s| oracle(s).is_some()).collect();
    let (unconverted, changed) = match &res.diagnostics {
        Diagnostics::Standardize { unconverted, .. } => (unconverted.get("v").cloned().unwrap_or_default(), res.cells_changed),
        other => panic!("{other:?}"),
    };
    let want_unconverted: Vec<usize> = (0..cells.len()).filter(|&i| !converted[i]).collect();
    assert_eq!(unconverted, want_unconverted);
    for (i, s) in cells.iter().enumerate() {
        let out = res.output.rows()[i][0].render().unwrap().into_owned();
        match oracle(s) {
            Some(v) => assert_eq!(out.parse::<f64>().unwrap(), v, "{s}"),
            None => assert_eq!(&out, s),
        }
    }
    assert!(changed <= cells.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trim_is_idempotent_on_arbitrary_text(values in prop::collection::vec("[ a-c]{0,4}", 1..30)) {
        let rows: Vec<Vec<CellValue>> = values
            .iter()
            .map(|s| vec![if s.is_empty() { CellValue::Missing } else { CellValue::Text(s.clone()) }])
            .collect();
        let ds = Dataset::new(vec![ColumnSchema::new("s", DType::Text)], rows, None).unwrap();
        let spec = ProcedureSpec::new(Family::Standardize, "trim_whitespace");
        let once = run_spec(&ds, &spec).unwrap();
        let twice = run_spec(&once.output, &spec).unwrap();
        prop_assert_eq!(twice.output.snapshot_id(), once.output.snapshot_id());
        prop_assert_eq!(once.output.row_count(), ds.row_count());
    }

    #[test]
    fn exact_dedup_keeps_first_occurrences(seed in any::<u64>()) {
        let ds = procedure_fixture(&mut rng(seed), 50);
        let res = run_spec(&ds, &ProcedureSpec::new(Family::Dedup, "exact")).unwrap();
        let groups = duplicate_groups_oracle(&ds);
        let dropped: Vec<usize> = groups.iter().flat_map(|g| g[1..].to_vec()).collect();
        let kept: Vec<usize> = (0..ds.row_count()).filter(|r| !dropped.contains(r)).collect();
        prop_assert_eq!(res.output.row_count(), kept.len());
        for (o, &i) in res.output.rows().iter().zip(&kept) {
            prop_assert!(rows_equal(o, &ds.rows()[i]));
        }
    }
}
