use nalgebra::DMatrix;

use crate::error::{EdaError, Result};

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(EdaError::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(EdaError::UndefinedMetric("accuracy of an empty set".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Average precision of one score column against binary relevance.
///
/// Samples are ranked by descending score, ties broken by lower index.
/// Returns `None` when there are no positives.
pub fn average_precision(scores: &[f64], relevant: &[bool]) -> Option<f64> {
    let positives = relevant.iter().filter(|&&r| r).count();
    if positives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if relevant[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

/// Mean over classes (with at least one positive) of one-vs-rest AP.
pub fn mean_average_precision(scores: &DMatrix<f64>, truth: &[usize]) -> Result<f64> {
    if scores.nrows() != truth.len() {
        return Err(EdaError::Shape(format!(
            "{} score rows for {} labels",
            scores.nrows(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(EdaError::UndefinedMetric("MAP of an empty set".into()));
    }
    let aps: Vec<f64> = (0..scores.ncols())
        .filter_map(|j| {
            let col: Vec<f64> = scores.column(j).iter().copied().collect();
            let rel: Vec<bool> = truth.iter().map(|&t| t == j).collect();
            average_precision(&col, &rel)
        })
        .collect();
    if aps.is_empty() {
        return Err(EdaError::UndefinedMetric("no class has a positive sample".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Mean and sample standard deviation (`n − 1`; zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
