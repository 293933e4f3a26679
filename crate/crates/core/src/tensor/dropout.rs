use super::{Mode, Tensor};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Per-element multipliers applied by a training-mode dropout: `0` for
/// dropped elements and `1 / (1 - p)` for survivors.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask(Vec<f64>);

impl DropoutMask {
    pub fn scales(&self) -> &[f64] {
        &self.0
    }

    pub fn survivors(&self) -> usize {
        self.0.iter().filter(|&&s| s != 0.0).count()
    }
}

/// Inverted dropout. Eval mode and `p == 0` are exact identities and draw
/// nothing from `rng`; otherwise one uniform is drawn per element, in order.
pub fn dropout(
    input: &Tensor,
    p: f64,
    mode: Mode,
    rng: &mut RngStream,
) -> Result<(Tensor, Option<DropoutMask>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::param(format!("dropout probability {p} outside [0, 1)")));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let scales: Vec<f64> = (0..input.len())
        .map(|_| if rng.uniform() < p { 0.0 } else { keep })
        .collect();
    let data = input.data().iter().zip(&scales).map(|(x, s)| x * s).collect();
    Ok((Tensor::new(input.shape(), data)?, Some(DropoutMask(scales))))
}

pub fn dropout_backward(mask: Option<&DropoutMask>, grad_out: &Tensor) -> Result<Tensor> {
    let Some(mask) = mask else {
        return Ok(grad_out.clone());
    };
    if mask.0.len() != grad_out.len() {
        return Err(Error::shape("dropout_backward: mask length mismatch"));
    }
    let data = grad_out.data().iter().zip(&mask.0).map(|(g, s)| g * s).collect();
    Tensor::new(grad_out.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{grad_check, projection_loss};

    #[test]
    fn eval_and_zero_rate_are_identity() {
        let mut rng = RngStream::new(0);
        let x = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.5);
        let (y, m) = dropout(&x, 0.5, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(m.is_none());
        let (y, _) = dropout(&x, 0.0, Mode::Train, &mut rng).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn invalid_probability() {
        let mut rng = RngStream::new(0);
        let x = Tensor::zeros(&[2]);
        assert!(dropout(&x, 1.0, Mode::Train, &mut rng).is_err());
        assert!(dropout(&x, -0.1, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn survivor_fraction_near_half() {
        let mut rng = RngStream::new(1);
        let x = Tensor::filled(&[1_000_000], 1.0);
        let (y, mask) = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let frac = mask.unwrap().survivors() as f64 / 1e6;
        // binomial std is 5e-4, so +-0.005 is a 10 sigma band
        assert!((frac - 0.5).abs() < 0.005, "{frac}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn same_stream_same_mask() {
        let x = Tensor::filled(&[64], 1.0);
        let a = dropout(&x, 0.3, Mode::Train, &mut RngStream::new(8)).unwrap();
        let b = dropout(&x, 0.3, Mode::Train, &mut RngStream::new(8)).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn gradient_uses_forward_mask() {
        for seed in 0..5 {
            let mut rng = RngStream::new(seed);
            let x = Tensor::from_fn(&[4, 5], |_| rng.uniform_range(-1.0, 1.0));
            let w = Tensor::from_fn(&[4, 5], |_| rng.uniform_range(-1.0, 1.0));
            let (_, mask) = dropout(&x, 0.5, Mode::Train, &mut RngStream::new(seed + 99)).unwrap();
            let g = dropout_backward(mask.as_ref(), &w).unwrap();
            let err = grad_check(x.data(), g.data(), 1e-4, |v| {
                let xi = Tensor::new(x.shape(), v.to_vec()).unwrap();
                let (y, _) = dropout(&xi, 0.5, Mode::Train, &mut RngStream::new(seed + 99)).unwrap();
                projection_loss(&y, &w)
            })
            .unwrap();
            assert!(err < 1e-4, "{err}");
        }
    }
}
