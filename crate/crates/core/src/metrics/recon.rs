//! Pixelwise reconstruction metrics.

use crate::data::Gei;
use crate::error::{Error, Result};

pub const RECON_ACC_THRESHOLD: f64 = 0.08;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape(format!("image sizes differ or are empty: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

pub fn mse_image(a: &Gei, b: &Gei) -> Result<f64> {
    mse(a.pixels(), b.pixels())
}

/// Fraction of pixels with `|a - b| < threshold` (strict).
pub fn recon_acc(a: &[f64], b: &[f64], threshold: f64) -> Result<f64> {
    check_len(a, b)?;
    let hits = a.iter().zip(b).filter(|(x, y)| (*x - *y).abs() < threshold).count();
    Ok(hits as f64 / a.len() as f64)
}

pub fn recon_acc_image(a: &Gei, b: &Gei, threshold: f64) -> Result<f64> {
    recon_acc(a.pixels(), b.pixels(), threshold)
}

/// Normalised 1-D Gaussian taps.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

// valid-mode separable filtering of a `w x h` plane
fn filter_valid(img: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|j| taps[j] * img[y * w + x + j]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| taps[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over all 11x11 windows lying fully inside a `width x height`
/// plane (Gaussian weights, sigma 1.5, dynamic range 1).
pub fn ssim_plane(a: &[f64], b: &[f64], width: usize, height: usize) -> Result<f64> {
    check_len(a, b)?;
    if a.len() != width * height {
        return Err(Error::shape(format!("{width}x{height} plane needs {} values", width * height)));
    }
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::shape(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")));
    }
    let taps = gaussian_window(SSIM_WINDOW, SSIM_SIGMA);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let product = |f: fn(f64, f64) -> f64| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect::<Vec<_>>();
    let mu_a = filter_valid(a, width, height, &taps);
    let mu_b = filter_valid(b, width, height, &taps);
    let aa = filter_valid(&product(|x, _| x * x), width, height, &taps);
    let bb = filter_valid(&product(|_, y| y * y), width, height, &taps);
    let ab = filter_valid(&product(|x, y| x * y), width, height, &taps);

    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}

pub fn ssim(a: &Gei, b: &Gei) -> Result<f64> {
    ssim_plane(a.pixels(), b.pixels(), a.size(), a.size())
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
