use super::Tensor;
use crate::error::Result;

/// Mean squared error over every element (batch and pixels) and its
/// gradient `2 (pred - target) / count`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    pred.same_shape(target, "mse_loss")?;
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, Tensor::new(pred.shape(), grad)?))
}
