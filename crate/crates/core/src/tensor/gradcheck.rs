//! Central-difference gradient verification.

use super::Tensor;
use crate::error::{Error, Result};

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare `analytic` against central differences of the scalar function
/// `loss` around `x` with step `h`; returns the maximum relative error.
pub fn grad_check<F>(x: &[f64], analytic: &[f64], h: f64, mut loss: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(1e-5..=1e-2).contains(&h) {
        return Err(Error::param(format!("finite-difference step {h} outside [1e-5, 1e-2]")));
    }
    if x.len() != analytic.len() {
        return Err(Error::shape(format!(
            "grad_check: {} inputs but {} gradient entries",
            x.len(),
            analytic.len()
        )));
    }
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = loss(&probe);
        probe[i] = x[i] - h;
        let down = loss(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

/// `sum(y * w)`: turns a tensor-valued op into a scalar whose gradient with
/// respect to `y` is `w`.
pub fn projection_loss(y: &Tensor, w: &Tensor) -> f64 {
    assert_eq!(y.shape(), w.shape(), "projection weights must match the output");
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_has_tiny_error() {
        let x = [0.3, -1.2, 2.0];
        let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let e = grad_check(&x, &g, 1e-4, |v| v.iter().map(|a| a * a).sum()).unwrap();
        assert!(e < 1e-9);
    }

    #[test]
    fn wrong_gradient_detected() {
        let x = [1.0];
        let e = grad_check(&x, &[3.0], 1e-4, |v| v[0] * v[0]).unwrap();
        assert!(e > 0.3);
    }

    #[test]
    fn step_out_of_range() {
        assert!(grad_check(&[1.0], &[1.0], 1e-1, |v| v[0]).is_err());
    }
}
