use super::Tensor;
use crate::error::{Error, Result};

/// 2x2 max pooling with stride 2.
///
/// Returns the pooled tensor and, for every output cell, the flat index of
/// the input element that won. Ties go to the first maximum in row-major
/// window order.
pub fn maxpool2x2(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (b, c, h, w) = input.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(format!(
            "maxpool2x2 needs even spatial dims, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Tensor::zeros(&[b, c, oh, ow]);
    let mut argmax = vec![0usize; b * c * oh * ow];
    let y = out.data_mut();
    for plane in 0..b * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                let window = [top, top + 1, top + w, top + w + 1];
                let mut best = window[0];
                for &idx in &window[1..] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                let o = (plane * oh + oy) * ow + ox;
                y[o] = x[best];
                argmax[o] = best;
            }
        }
    }
    Ok((out, argmax))
}

/// Route each upstream gradient to the input position that won the max.
pub fn maxpool2x2_backward(
    grad_out: &Tensor,
    argmax: &[usize],
    input_shape: &[usize],
) -> Result<Tensor> {
    if grad_out.len() != argmax.len() {
        return Err(Error::shape(format!(
            "maxpool2x2_backward: {} gradients for {} pooled cells",
            grad_out.len(),
            argmax.len()
        )));
    }
    let mut gx = Tensor::zeros(input_shape);
    let g = gx.data_mut();
    for (&idx, &v) in argmax.iter().zip(grad_out.data()) {
        g[idx] += v;
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::tensor::gradcheck::{grad_check, projection_loss};

    #[test]
    fn single_window() {
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, arg) = maxpool2x2(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let g = maxpool2x2_backward(&Tensor::filled(&[1, 1, 1, 1], 1.0), &arg, x.shape()).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn ties_route_to_first_position() {
        let x = Tensor::filled(&[1, 2, 4, 4], 0.5);
        let (y, arg) = maxpool2x2(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
        let g = maxpool2x2_backward(&Tensor::filled(y.shape(), 1.0), &arg, x.shape()).unwrap();
        for plane in 0..2 {
            for r in 0..4 {
                for c in 0..4 {
                    let expect = if r % 2 == 0 && c % 2 == 0 { 1.0 } else { 0.0 };
                    assert_eq!(g.data()[plane * 16 + r * 4 + c], expect);
                }
            }
        }
    }

    #[test]
    fn odd_size_is_shape_error() {
        assert!(maxpool2x2(&Tensor::zeros(&[1, 1, 3, 4])).is_err());
        assert!(maxpool2x2(&Tensor::zeros(&[1, 1, 4, 5])).is_err());
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = RngStream::new(7);
        let x = Tensor::from_fn(&[1, 1, 8, 8], |_| rng.uniform());
        let (y, _) = maxpool2x2(&x).unwrap();
        for oy in 0..4 {
            for ox in 0..4 {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(x.data()[(2 * oy + dy) * 8 + 2 * ox + dx]);
                    }
                }
                assert_eq!(y.data()[oy * 4 + ox], m);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let mut rng = RngStream::new(100 + seed);
            let x = Tensor::from_fn(&[2, 2, 6, 6], |_| rng.uniform_range(-1.0, 1.0));
            let (y, arg) = maxpool2x2(&x).unwrap();
            let w = Tensor::from_fn(y.shape(), |_| rng.uniform_range(-1.0, 1.0));
            let g = maxpool2x2_backward(&w, &arg, x.shape()).unwrap();
            let err = grad_check(x.data(), g.data(), 1e-4, |v| {
                let xi = Tensor::new(x.shape(), v.to_vec()).unwrap();
                projection_loss(&maxpool2x2(&xi).unwrap().0, &w)
            })
            .unwrap();
            assert!(err < 1e-4, "{err}");
        }
    }
}
