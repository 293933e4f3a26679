use super::Tensor;
use crate::error::Result;

pub fn relu(input: &Tensor) -> Tensor {
    map(input, |v| v.max(0.0))
}

/// Gradient passes where the forward input was strictly positive; the
/// subgradient at zero is taken as 0.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    input.same_shape(grad_out, "relu_backward")?;
    Ok(zip(input, grad_out, |x, g| if x > 0.0 { g } else { 0.0 }))
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    map(input, |v| {
        // split on sign so exp never overflows
        if v >= 0.0 {
            1.0 / (1.0 + (-v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        }
    })
}

/// Takes the forward *output* `s`, since `ds/dx = s (1 - s)`.
pub fn sigmoid_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    output.same_shape(grad_out, "sigmoid_backward")?;
    Ok(zip(output, grad_out, |s, g| g * s * (1.0 - s)))
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = t.data().iter().map(|&v| f(v)).collect();
    Tensor::new(t.shape(), data).expect("same length")
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape(), data).expect("same length")
}
