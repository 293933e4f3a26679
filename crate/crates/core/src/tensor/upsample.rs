use super::Tensor;
use crate::error::{Error, Result};

/// Nearest-neighbour 2x upsampling: every pixel becomes a 2x2 block.
pub fn upsample_nearest2x(input: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = input.dims4()?;
    let (oh, ow) = (2 * h, 2 * w);
    let x = input.data();
    let mut out = Tensor::zeros(&[b, c, oh, ow]);
    let y = out.data_mut();
    for plane in 0..b * c {
        let src = &x[plane * h * w..(plane + 1) * h * w];
        let dst = &mut y[plane * oh * ow..(plane + 1) * oh * ow];
        for r in 0..h {
            let line = &src[r * w..(r + 1) * w];
            let (upper, lower) = dst[2 * r * ow..(2 * r + 2) * ow].split_at_mut(ow);
            for (cidx, &v) in line.iter().enumerate() {
                upper[2 * cidx] = v;
                upper[2 * cidx + 1] = v;
            }
            lower.copy_from_slice(upper);
        }
    }
    Ok(out)
}

/// Adjoint of [`upsample_nearest2x`]: sums each 2x2 block of upstream
/// gradient onto its source pixel.
pub fn upsample_nearest2x_backward(grad_out: &Tensor) -> Result<Tensor> {
    let (b, c, oh, ow) = grad_out.dims4()?;
    if oh % 2 != 0 || ow % 2 != 0 {
        return Err(Error::shape(format!(
            "upsample backward needs even dims, got {oh}x{ow}"
        )));
    }
    let (h, w) = (oh / 2, ow / 2);
    let g = grad_out.data();
    let mut gx = Tensor::zeros(&[b, c, h, w]);
    let out = gx.data_mut();
    for plane in 0..b * c {
        let base = plane * oh * ow;
        for r in 0..h {
            for cidx in 0..w {
                let top = base + 2 * r * ow + 2 * cidx;
                out[(plane * h + r) * w + cidx] = g[top] + g[top + 1] + g[top + ow] + g[top + ow + 1];
            }
        }
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::tensor::gradcheck::{grad_check, projection_loss};
    use crate::tensor::maxpool2x2;

    #[test]
    fn replicates_blocks() {
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = upsample_nearest2x(&x).unwrap();
        assert_eq!(
            y.data(),
            &[
                1.0, 1.0, 2.0, 2.0, //
                1.0, 1.0, 2.0, 2.0, //
                3.0, 3.0, 4.0, 4.0, //
                3.0, 3.0, 4.0, 4.0
            ]
        );
    }

    #[test]
    fn backward_of_ones_is_four() {
        let g = upsample_nearest2x_backward(&Tensor::filled(&[2, 3, 6, 4], 1.0)).unwrap();
        assert_eq!(g.shape(), &[2, 3, 3, 2]);
        assert!(g.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn upsample_then_pool_is_identity() {
        for seed in 0..20 {
            let mut rng = RngStream::new(seed);
            let x = Tensor::from_fn(&[2, 3, 5, 7], |_| rng.normal(0.0, 3.0));
            let (y, _) = maxpool2x2(&upsample_nearest2x(&x).unwrap()).unwrap();
            assert_eq!(y, x);
        }
    }

    #[test]
    fn gradient_is_exact_for_linear_op() {
        let mut rng = RngStream::new(9);
        let x = Tensor::from_fn(&[1, 2, 3, 3], |_| rng.uniform());
        let w = Tensor::from_fn(&[1, 2, 6, 6], |_| rng.uniform_range(-1.0, 1.0));
        let g = upsample_nearest2x_backward(&w).unwrap();
        let err = grad_check(x.data(), g.data(), 1e-3, |v| {
            let xi = Tensor::new(x.shape(), v.to_vec()).unwrap();
            projection_loss(&upsample_nearest2x(&xi).unwrap(), &w)
        })
        .unwrap();
        assert!(err < 1e-7, "{err}");
    }
}
