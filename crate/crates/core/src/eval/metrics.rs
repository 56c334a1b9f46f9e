use indexmap::IndexMap;

/// Confusion counts, `m[true][predicted]`.
pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        m[t][p] += 1;
    }
    m
}

/// Accuracy and macro precision, recall and F1 over the classes that occur
/// as a true or a predicted label. Undefined ratios count as 0.
pub fn classification_metrics(confusion: &[Vec<usize>]) -> IndexMap<String, f64> {
    let k = confusion.len();
    let total: usize = confusion.iter().flatten().sum();
    let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut p_sum, mut r_sum, mut f_sum, mut present) = (0.0, 0.0, 0.0, 0);
    for c in 0..k {
        let actual: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        if actual == 0 && predicted == 0 {
            continue;
        }
        present += 1;
        let tp = confusion[c][c];
        let p = div(tp, predicted);
        let r = div(tp, actual);
        p_sum += p;
        r_sum += r;
        f_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let macro_avg = |s: f64| if present == 0 { 0.0 } else { s / present as f64 };
    IndexMap::from([
        ("accuracy".to_string(), div(trace, total)),
        ("precision".to_string(), macro_avg(p_sum)),
        ("recall".to_string(), macro_avg(r_sum)),
        ("f1".to_string(), macro_avg(f_sum)),
    ])
}

/// RMSE, MAE and the coefficient of determination. R² is 1 for a perfect
/// fit of a constant target and 0 for any other fit of one.
pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> IndexMap<String, f64> {
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    let mae = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / n;
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    IndexMap::from([
        ("rmse".to_string(), (ss_res / n).sqrt()),
        ("mae".to_string(), mae),
        ("r2".to_string(), r2),
    ])
}
