//! Accuracy metrics.

use ndarray::Array2;

use super::DataError;

/// Fraction of masked entries predicted within 5% of the truth. A true value
/// of zero only counts when the prediction is exactly zero.
pub fn imputation_accuracy(pred: &[f64], truth: &[f64], mask: &[bool]) -> Result<f64, DataError> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for ((&p, &t), &m) in pred.iter().zip(truth).zip(mask) {
        if !m {
            continue;
        }
        total += 1;
        let ok = if t == 0.0 { p == 0.0 } else { (p - t).abs() <= 0.05 * t.abs() };
        correct += usize::from(ok);
    }
    if total == 0 {
        return Err(DataError::EmptyEvalMask);
    }
    Ok(correct as f64 / total as f64)
}

/// Accuracy of always predicting `fill` (typically the median of the known
/// values).
pub fn median_accuracy(fill: f64, truth: &[f64], mask: &[bool]) -> Result<f64, DataError> {
    imputation_accuracy(&vec![fill; truth.len()], truth, mask)
}

/// Argmax accuracy over masked rows. Ties go to the lowest class index.
pub fn classification_accuracy<T: Copy + PartialOrd>(logits: &Array2<T>, labels: &[usize], mask: &[bool]) -> Result<f64, DataError> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for (r, row) in logits.rows().into_iter().enumerate() {
        if !mask[r] {
            continue;
        }
        total += 1;
        let mut best = 0;
        for (c, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = c;
            }
        }
        correct += usize::from(best == labels[r]);
    }
    if total == 0 {
        return Err(DataError::EmptyEvalMask);
    }
    Ok(correct as f64 / total as f64)
}
