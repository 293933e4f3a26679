use super::Tensor;
use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the previous running statistic in the moving average.
pub const BN_MOMENTUM: f64 = 0.9;

/// What the backward pass needs from a training-mode forward.
#[derive(Clone, Debug)]
pub struct BatchNormCache {
    shape: Vec<usize>,
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BatchNormGrads {
    pub input: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
}

fn check_params(input: &Tensor, tensors: &[(&str, &Tensor)]) -> Result<(usize, usize, usize)> {
    let (b, c, h, w) = input.dims4()?;
    for (name, t) in tensors {
        if t.shape() != [c] {
            return Err(Error::shape(format!(
                "batchnorm: {name} shape {:?}, expected [{c}]",
                t.shape()
            )));
        }
    }
    Ok((b, c, h * w))
}

/// Training-mode batch normalisation: per-channel statistics over `(B, H, W)`.
/// Updates the running mean and (unbiased) variance in place.
pub fn batchnorm(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &mut Tensor,
    running_var: &mut Tensor,
) -> Result<(Tensor, BatchNormCache)> {
    let (b, c, hw) = check_params(
        input,
        &[
            ("gamma", gamma),
            ("beta", beta),
            ("running mean", running_mean),
            ("running var", running_var),
        ],
    )?;
    let n = b * hw;
    if n < 2 {
        return Err(Error::shape(format!(
            "batchnorm in train mode needs at least 2 values per channel, got {n}"
        )));
    }
    let x = input.data();
    let mut out = Tensor::zeros(input.shape());
    let mut normalized = vec![0.0; x.len()];
    let mut inv_std = vec![0.0; c];
    for ch in 0..c {
        let planes = || (0..b).map(move |s| (s * c + ch) * hw);
        let mut sum = 0.0;
        for base in planes() {
            sum += x[base..base + hw].iter().sum::<f64>();
        }
        let mean = sum / n as f64;
        let mut sq = 0.0;
        for base in planes() {
            sq += x[base..base + hw].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        let var = sq / n as f64;
        let istd = 1.0 / (var + BN_EPSILON).sqrt();
        inv_std[ch] = istd;
        let (g, bt) = (gamma.data()[ch], beta.data()[ch]);
        let y = out.data_mut();
        for base in planes() {
            for i in base..base + hw {
                let xh = (x[i] - mean) * istd;
                normalized[i] = xh;
                y[i] = g * xh + bt;
            }
        }
        let rm = &mut running_mean.data_mut()[ch];
        *rm = BN_MOMENTUM * *rm + (1.0 - BN_MOMENTUM) * mean;
        let rv = &mut running_var.data_mut()[ch];
        *rv = BN_MOMENTUM * *rv + (1.0 - BN_MOMENTUM) * sq / (n - 1) as f64;
    }
    Ok((
        out,
        BatchNormCache {
            shape: input.shape().to_vec(),
            normalized,
            inv_std,
        },
    ))
}

/// Inference-mode batch normalisation with the running statistics.
pub fn batchnorm_eval(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &Tensor,
    running_var: &Tensor,
) -> Result<Tensor> {
    let (b, c, hw) = check_params(
        input,
        &[
            ("gamma", gamma),
            ("beta", beta),
            ("running mean", running_mean),
            ("running var", running_var),
        ],
    )?;
    let x = input.data();
    let mut out = Tensor::zeros(input.shape());
    let y = out.data_mut();
    for ch in 0..c {
        let istd = 1.0 / (running_var.data()[ch] + BN_EPSILON).sqrt();
        let mean = running_mean.data()[ch];
        let (g, bt) = (gamma.data()[ch], beta.data()[ch]);
        for s in 0..b {
            let base = (s * c + ch) * hw;
            for i in base..base + hw {
                y[i] = g * (x[i] - mean) * istd + bt;
            }
        }
    }
    Ok(out)
}

/// Full backward through the batch statistics.
pub fn batchnorm_backward(
    cache: &BatchNormCache,
    gamma: &Tensor,
    grad_out: &Tensor,
) -> Result<BatchNormGrads> {
    if grad_out.shape() != cache.shape.as_slice() {
        return Err(Error::shape(format!(
            "batchnorm_backward: upstream gradient {:?}, expected {:?}",
            grad_out.shape(),
            cache.shape
        )));
    }
    let (b, c, hw) = check_params(grad_out, &[("gamma", gamma)])?;
    let n = (b * hw) as f64;
    let dy = grad_out.data();
    let xh = &cache.normalized;
    let mut gx = vec![0.0; dy.len()];
    let mut ggamma = vec![0.0; c];
    let mut gbeta = vec![0.0; c];
    for ch in 0..c {
        let mut sum_dy = 0.0;
        let mut sum_dy_xh = 0.0;
        for s in 0..b {
            let base = (s * c + ch) * hw;
            for i in base..base + hw {
                sum_dy += dy[i];
                sum_dy_xh += dy[i] * xh[i];
            }
        }
        gbeta[ch] = sum_dy;
        ggamma[ch] = sum_dy_xh;
        let scale = gamma.data()[ch] * cache.inv_std[ch] / n;
        for s in 0..b {
            let base = (s * c + ch) * hw;
            for i in base..base + hw {
                gx[i] = scale * (n * dy[i] - sum_dy - xh[i] * sum_dy_xh);
            }
        }
    }
    Ok(BatchNormGrads {
        input: Tensor::new(&cache.shape, gx)?,
        gamma: Tensor::new(&[c], ggamma)?,
        beta: Tensor::new(&[c], gbeta)?,
    })
}
