use super::{Tensor2, SCORE_EPS};
use crate::error::{Error, Result};

/// Row-wise softmax with max-subtraction for stability.
pub fn softmax_rows(logits: &Tensor2) -> Tensor2 {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean cross-entropy over rows. Returns the loss and the gradient with
/// respect to the logits, (softmax − one-hot)/rows.
pub fn softmax_xent(logits: &Tensor2, labels: &[usize]) -> Result<(f64, Tensor2)> {
    let (n, classes) = logits.dim();
    if labels.len() != n {
        return Err(Error::Shape {
            context: "softmax_xent",
            expected: format!("{n} labels"),
            got: format!("{} labels", labels.len()),
        });
    }
    for &label in labels {
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
    }
    let mut loss = 0.0;
    let mut grad = logits.clone();
    for (mut row, &label) in grad.rows_mut().into_iter().zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let logsum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        loss += logsum - row[label];
        row.mapv_inplace(|v| (v - logsum).exp());
        row[label] -= 1.0;
    }
    let scale = 1.0 / n as f64;
    grad.mapv_inplace(|v| v * scale);
    Ok((loss * scale, grad))
}

/// Elementwise logistic sigmoid on a single-column tensor; outputs strictly in (0,1).
pub fn sigmoid_score(x: &Tensor2) -> Result<Tensor2> {
    if x.ncols() != 1 {
        return Err(Error::Shape {
            context: "sigmoid_score",
            expected: "1 column".into(),
            got: format!("{} columns", x.ncols()),
        });
    }
    Ok(x.mapv(|v| 1.0 / (1.0 + (-v).exp())))
}

/// ln(s) with the score clamped away from 0.
pub fn log_score(s: f64) -> f64 {
    s.clamp(SCORE_EPS, 1.0 - SCORE_EPS).ln()
}

/// ln(1 − s) with the score clamped away from 1.
pub fn log_one_minus_score(s: f64) -> f64 {
    (1.0 - s.clamp(SCORE_EPS, 1.0 - SCORE_EPS)).ln()
}

/// Mean squared error over all entries.
pub fn mse(pred: &Tensor2, target: &Tensor2) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape {
            context: "mse",
            expected: format!("{:?}", target.dim()),
            got: format!("{:?}", pred.dim()),
        });
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// Gradient of [`mse`] with respect to `pred`: 2(pred − target)/len.
pub fn mse_grad(pred: &Tensor2, target: &Tensor2) -> Tensor2 {
    let scale = 2.0 / pred.len() as f64;
    let mut g = pred - target;
    g.mapv_inplace(|v| v * scale);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_logits_cost_ln_c() {
        let logits = array![[0.3, 0.3, 0.3, 0.3], [-2.0, -2.0, -2.0, -2.0]];
        let (loss, _) = softmax_xent(&logits, &[0, 3]).unwrap();
        assert!((loss - 1.3862943611).abs() < 1e-9);
    }

    #[test]
    fn confident_correct_logit_costs_near_zero() {
        let (loss, _) = softmax_xent(&array![[10.0, -10.0]], &[0]).unwrap();
        let expected = (1.0 + (-20.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-15);
        assert!(loss < 3e-9);
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let err = softmax_xent(&array![[0.0, 0.0]], &[2]).unwrap_err();
        assert!(matches!(
            err,
            Error::LabelOutOfRange { label: 2, classes: 2 }
        ));
    }

    #[test]
    fn xent_gradient_matches_finite_differences() {
        let logits = array![[0.4, -1.3, 2.2], [0.0, 0.7, -0.2]];
        let labels = [2, 0];
        let (_, grad) = softmax_xent(&logits, &labels).unwrap();
        let step = 1e-6;
        for i in 0..2 {
            for j in 0..3 {
                let mut plus = logits.clone();
                plus[[i, j]] += step;
                let mut minus = logits.clone();
                minus[[i, j]] -= step;
                let numeric = (softmax_xent(&plus, &labels).unwrap().0
                    - softmax_xent(&minus, &labels).unwrap().0)
                    / (2.0 * step);
                assert!((grad[[i, j]] - numeric).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn softmax_rows_normalize() {
        let probs = softmax_rows(&array![[3.0, 1.0, 0.2], [-5.0, 0.0, 5.0]]);
        for row in probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        // zero logits → uniform
        let uniform = softmax_rows(&Tensor2::zeros((2, 4)));
        assert!(uniform.iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn sigmoid_score_wants_one_column() {
        assert!(sigmoid_score(&Tensor2::zeros((3, 2))).is_err());
        let s = sigmoid_score(&Tensor2::zeros((3, 1))).unwrap();
        assert!(s.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn clamped_logs_stay_finite_at_the_boundaries() {
        assert!(log_score(0.0).is_finite());
        assert!(log_one_minus_score(1.0).is_finite());
        assert!((log_score(0.5) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mse_and_gradient() {
        let pred = array![[1.0, 2.0], [3.0, 4.0]];
        let target = array![[0.0, 2.0], [3.0, 2.0]];
        assert!((mse(&pred, &target).unwrap() - (1.0 + 4.0) / 4.0).abs() < 1e-15);
        let g = mse_grad(&pred, &target);
        assert_eq!(g, array![[0.5, 0.0], [0.0, 1.0]]);
        assert!(mse(&pred, &Tensor2::zeros((1, 2))).is_err());
    }
}
