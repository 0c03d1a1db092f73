use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Row-wise softmax of a `[B, C]` tensor.
pub fn softmax(logits: &Tensor) -> Result<Vec<Vec<f64>>> {
    logits.expect_rank(2, "softmax")?;
    let c = logits.shape()[1];
    Ok(logits
        .data
        .chunks(c)
        .map(|row| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / sum).collect()
        })
        .collect())
}

/// Mean cross-entropy of `softmax(logits)` against integer targets, and its
/// gradient `(softmax − onehot) / B`.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    logits.expect_rank(2, "cross-entropy logits")?;
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    if targets.len() != b {
        return Err(Error::Shape(format!("{} targets for a batch of {b}", targets.len())));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= c) {
        return Err(Error::Validation(format!("class index {t} out of range for {c} classes")));
    }
    let probs = softmax(logits)?;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(b * c);
    for (row, &t) in probs.iter().zip(targets) {
        loss -= row[t].max(f64::MIN_POSITIVE).ln();
        for (k, &p) in row.iter().enumerate() {
            let onehot = if k == t { 1.0 } else { 0.0 };
            grad.push((p - onehot) / b as f64);
        }
    }
    Ok((loss / b as f64, Tensor::new(vec![b, c], grad)?))
}
