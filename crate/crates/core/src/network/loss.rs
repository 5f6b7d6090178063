use serde::{Deserialize, Serialize};

use crate::error::{KanError, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    CrossEntropy,
    Mse,
}

/// Mean softmax cross-entropy over the batch and its gradient
/// `(softmax - onehot) / batch`.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(KanError::shape(
            "cross_entropy",
            format!("logits {}x{}", logits.rows(), logits.cols()),
            format!("{} labels", labels.len()),
        ));
    }
    let classes = logits.cols();
    let batch = logits.rows() as f64;
    let mut grad = Matrix::zeros(logits.rows(), classes);
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(KanError::Data(format!(
                "label {label} at row {r} out of range for {classes} classes"
            )));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_denom = denom.ln();
        total += log_denom - (row[label] - max);
        for (c, g) in grad.row_mut(r).iter_mut().enumerate() {
            let p = (row[c] - max).exp() / denom;
            *g = (p - if c == label { 1.0 } else { 0.0 }) / batch;
        }
    }
    Ok((total / batch, grad))
}

/// Mean over all entries of the squared error.
pub fn mse(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    let diff = pred.sub(target)?;
    let n = diff.as_slice().len() as f64;
    let loss = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff.scale(2.0 / n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_classes() {
        let (loss, _) = cross_entropy(&Matrix::filled(3, 10, 0.7), &[0, 4, 9]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logit_gives_near_zero_loss() {
        let mut logits = Matrix::zeros(1, 10);
        logits[(0, 0)] = 100.0;
        let (loss, _) = cross_entropy(&logits, &[0]).unwrap();
        assert!(loss < 1e-40);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let logits = Matrix::from_rows(&[[0.3, -1.2, 2.0, 0.1], [1.5, 0.2, -0.7, 0.9]]).unwrap();
        let labels = [2, 0];
        let (_, grad) = cross_entropy(&logits, &labels).unwrap();
        let eps = 1e-6;
        for r in 0..2 {
            for c in 0..4 {
                let mut plus = logits.clone();
                plus[(r, c)] += eps;
                let mut minus = logits.clone();
                minus[(r, c)] -= eps;
                let fd = (cross_entropy(&plus, &labels).unwrap().0
                    - cross_entropy(&minus, &labels).unwrap().0)
                    / (2.0 * eps);
                assert!((fd - grad[(r, c)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            cross_entropy(&Matrix::zeros(1, 3), &[3]),
            Err(KanError::Data(_))
        ));
    }

    #[test]
    fn mse_value_and_gradient() {
        let p = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let t = Matrix::from_rows(&[[0.0, 4.0]]).unwrap();
        let (loss, grad) = mse(&p, &t).unwrap();
        assert_eq!(loss, 2.5);
        assert_eq!(grad.as_slice(), &[1.0, -2.0]);
    }
}
