mod support;

use dqi_core::drift::{drift_report, ks_pvalue, ks_statistic, ks_test};
use dqi_core::tabular::{CellValue, ColumnSchema, DType, Dataset};
use dqi_core::DqiError;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use support::*;

#[test]
fn statistic_matches_pooled_point_oracle_on_tied_samples() {
    let mut r = rng(7);
    for _ in 0..300 {
        let (x, y) = tied_sample_pair(&mut r);
        let d = ks_statistic(&x, &y).unwrap();
        assert!((d - ks_statistic_oracle(&x, &y)).abs() <= 1e-12);
    }
}

#[test]
fn pvalue_matches_reference_series() {
    let mut r = rng(8);
    for _ in 0..2000 {
        let n1 = r.random_range(1..=500);
        let n2 = r.random_range(1..=500);
        let d: f64 = r.random_range(0.0..=1.0);
        let p = ks_pvalue(d, n1, n2);
        let want = ks_pvalue_oracle(d, n1, n2);
        assert!((p - want).abs() <= 1e-8, "d={d} n1={n1} n2={n2}: {p} vs {want}");
    }
    assert!((ks_pvalue(0.2, 50, 50) - ks_pvalue_oracle(0.2, 50, 50)).abs() <= 1e-8);
}

#[test]
fn documented_values() {
    assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), 1.0);
    assert_eq!(ks_statistic(&[3.0, 1.0, 2.0, 2.0], &[2.0, 1.0, 2.0, 3.0]).unwrap(), 0.0);
    assert_eq!(ks_pvalue(0.0, 10, 10), 1.0);
    assert!(ks_pvalue(1.0, 100, 100) < 1e-12);
    assert!(matches!(ks_statistic(&[], &[1.0]), Err(DqiError::EmptySample)));
}

#[test]
fn same_distribution_rejection_rate_is_near_alpha() {
    let mut r = rng(11);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let trials = 300;
    let mut same = 0;
    let mut shifted = 0;
    for _ in 0..trials {
        let x: Vec<f64> = (0..200).map(|_| normal.sample(&mut r)).collect();
        let y: Vec<f64> = (0..200).map(|_| normal.sample(&mut r)).collect();
        let z: Vec<f64> = (0..200).map(|_| normal.sample(&mut r) + 1.0).collect();
        same += usize::from(ks_test("c", &x, &y, 0.05).unwrap().drifted);
        shifted += usize::from(ks_test("c", &x, &z, 0.05).unwrap().drifted);
    }
    let rate = same as f64 / trials as f64;
    assert!((0.01..=0.1).contains(&rate), "false positive rate {rate}");
    assert!(shifted as f64 / trials as f64 > 0.95);
}

fn numeric_table(values: &[Option<f64>]) -> Dataset {
    let rows = values.iter().map(|v| vec![v.map_or(CellValue::Missing, CellValue::Number)]).collect();
    Dataset::new(vec![ColumnSchema::new("v", DType::Numeric)], rows, None).unwrap()
}

#[test]
fn constant_replacement_is_flagged() {
    let mut r = rng(3);
    let normal = Normal::new(10.0, 2.0).unwrap();
    let before: Vec<Option<f64>> = (0..40).map(|_| Some(normal.sample(&mut r))).collect();
    let after: Vec<Option<f64>> = vec![Some(10.0); 40];
    let rep = drift_report(&numeric_table(&before), &numeric_table(&after), 0.05).unwrap();
    assert!(rep.ks[0].drifted);
    assert_eq!(rep.drift_penalty, 1.0);
}

#[test]
fn mean_imputing_five_percent_is_not_flagged() {
    let mut r = rng(2024);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let before: Vec<Option<f64>> = (0..1000)
        .map(|_| {
            let v = normal.sample(&mut r);
            (!r.random_bool(0.05)).then_some(v)
        })
        .collect();
    let observed: Vec<f64> = before.iter().flatten().copied().collect();
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let after: Vec<Option<f64>> = before.iter().map(|v| Some(v.unwrap_or(mean))).collect();
    let rep = drift_report(&numeric_table(&before), &numeric_table(&after), 0.05).unwrap();
    assert!(!rep.ks[0].drifted, "{:?}", rep.ks[0]);
}

#[test]
fn identical_snapshots_have_zero_statistics() {
    let mut r = rng(5);
    let (ds, _) = quality_fixture(&mut r);
    let rep = drift_report(&ds, &ds, 0.05).unwrap();
    assert!(rep.ks.iter().all(|k| k.d_stat == 0.0 && k.p_value == 1.0 && !k.drifted));
    assert!(rep.categorical.iter().all(|c| c.tv_distance == 0.0));
    assert_eq!(rep.drift_penalty, 0.0);
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-50i32..50).prop_map(|v| f64::from(v) / 4.0), 1..80)
}

proptest! {
    #[test]
    fn symmetric(x in sample(), y in sample()) {
        let a = ks_statistic(&x, &y).unwrap();
        prop_assert_eq!(a, ks_statistic(&y, &x).unwrap());
        prop_assert_eq!(ks_pvalue(a, x.len(), y.len()), ks_pvalue(a, y.len(), x.len()));
    }

    #[test]
    fn shift_invariant(x in sample(), y in sample(), c in -1000i32..1000) {
        let c = f64::from(c);
        let xs: Vec<f64> = x.iter().map(|v| v + c).collect();
        let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
        prop_assert_eq!(ks_statistic(&x, &y).unwrap(), ks_statistic(&xs, &ys).unwrap());
    }

    #[test]
    fn order_invariant(x in sample(), y in sample(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut r = rng(seed);
        let mut xp = x.clone();
        xp.shuffle(&mut r);
        prop_assert_eq!(ks_statistic(&x, &y).unwrap(), ks_statistic(&xp, &y).unwrap());
    }

    #[test]
    fn bounded_and_matches_oracle(x in sample(), y in sample()) {
        let d = ks_statistic(&x, &y).unwrap();
        let p = ks_pvalue(d, x.len(), y.len());
        prop_assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&p));
        prop_assert!((d - ks_statistic_oracle(&x, &y)).abs() <= 1e-12);
    }

    #[test]
    fn pvalue_non_increasing_in_d(d1 in 0.0..=1.0f64, d2 in 0.0..=1.0f64, n1 in 1usize..600, n2 in 1usize..600) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(ks_pvalue(hi, n1, n2) <= ks_pvalue(lo, n1, n2));
    }

    #[test]
    fn drifted_iff_p_below_alpha(x in sample(), y in sample(), alpha in 0.001..0.5f64) {
        let k = ks_test("c", &x, &y, alpha).unwrap();
        prop_assert_eq!(k.drifted, k.p_value < alpha);
    }
}
