//! Plain double-precision image-quality metrics on square planes.

use super::loss::{ms_ssim_plan, LossConfig};
use crate::error::{Error, Result};
use crate::nn::kernels::gaussian_taps;

fn check(pred: &[f64], target: &[f64], size: usize) -> Result<()> {
    if pred.len() != target.len() || pred.len() != size * size {
        return Err(Error::shape(format!(
            "metric inputs must both be {size}x{size}, got {} and {} values",
            pred.len(),
            target.len()
        )));
    }
    Ok(())
}

fn blur(x: &[f64], size: usize, taps: &[f64]) -> (Vec<f64>, usize) {
    let k = taps.len();
    let o = size + 1 - k;
    let mut tmp = vec![0.0; size * o];
    for r in 0..size {
        for c in 0..o {
            tmp[r * o + c] = taps.iter().enumerate().map(|(t, w)| w * x[r * size + c + t]).sum();
        }
    }
    let mut out = vec![0.0; o * o];
    for r in 0..o {
        for c in 0..o {
            out[r * o + c] = taps.iter().enumerate().map(|(t, w)| w * tmp[(r + t) * o + c]).sum();
        }
    }
    (out, o)
}

fn pool(x: &[f64], size: usize) -> (Vec<f64>, usize) {
    let o = size / 2;
    let mut out = vec![0.0; o * o];
    for r in 0..o {
        for c in 0..o {
            out[r * o + c] = 0.25
                * (x[2 * r * size + 2 * c]
                    + x[2 * r * size + 2 * c + 1]
                    + x[(2 * r + 1) * size + 2 * c]
                    + x[(2 * r + 1) * size + 2 * c + 1]);
        }
    }
    (out, o)
}

/// Mean luminance and contrast-structure maps at one scale.
fn ssim_terms(x: &[f64], y: &[f64], size: usize, taps: &[f64], c1: f64, c2: f64) -> (f64, f64) {
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let (mx, o) = blur(x, size, taps);
    let (my, _) = blur(y, size, taps);
    let (bxx, _) = blur(&prod(x, x), size, taps);
    let (byy, _) = blur(&prod(y, y), size, taps);
    let (bxy, _) = blur(&prod(x, y), size, taps);
    let (mut cs_sum, mut ssim_sum) = (0.0, 0.0);
    for i in 0..o * o {
        let vx = bxx[i] - mx[i] * mx[i];
        let vy = byy[i] - my[i] * my[i];
        let cov = bxy[i] - mx[i] * my[i];
        let cs = (2.0 * cov + c2) / (vx + vy + c2);
        let l = (2.0 * mx[i] * my[i] + c1) / (mx[i] * mx[i] + my[i] * my[i] + c1);
        cs_sum += cs;
        ssim_sum += l * cs;
    }
    let n = (o * o) as f64;
    (ssim_sum / n, cs_sum / n)
}

/// Single-scale SSIM (Gaussian window) averaged over the valid map.
pub fn ssim(pred: &[f64], target: &[f64], size: usize, range: f64) -> Result<f64> {
    check(pred, target, size)?;
    let cfg = LossConfig::default();
    let (_, window) = ms_ssim_plan(size, &cfg);
    let taps = gaussian_taps(window, cfg.sigma);
    let (s, _) = ssim_terms(
        pred,
        target,
        size,
        &taps,
        (cfg.k1 * range).powi(2),
        (cfg.k2 * range).powi(2),
    );
    Ok(s)
}

/// Multi-scale SSIM matching the differentiable loss term.
pub fn ms_ssim(pred: &[f64], target: &[f64], size: usize, range: f64, cfg: &LossConfig) -> Result<f64> {
    check(pred, target, size)?;
    let (weights, window) = ms_ssim_plan(size, cfg);
    let taps = gaussian_taps(window, cfg.sigma);
    let (c1, c2) = ((cfg.k1 * range).powi(2), (cfg.k2 * range).powi(2));
    let (mut x, mut y, mut n) = (pred.to_vec(), target.to_vec(), size);
    let mut out = 1.0;
    for (j, &w) in weights.iter().enumerate() {
        let (s, cs) = ssim_terms(&x, &y, n, &taps, c1, c2);
        let last = j + 1 == weights.len();
        out *= (if last { s } else { cs }).max(1e-8).powf(w);
        if !last {
            (x, _) = pool(&x, n);
            (y, n) = pool(&y, n);
        }
    }
    Ok(out)
}

/// `10 log10(range^2 / MSE)`; `+inf` for identical inputs.
pub fn psnr(pred: &[f64], target: &[f64], range: f64) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::shape("psnr inputs must be non-empty and equal length"));
    }
    let mse = pred.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pred.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (range * range / mse).log10() })
}

/// `100 * ||pred - target|| / ||target||`, in percent.
pub fn nrmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::shape("nrmse inputs must be non-empty and equal length"));
    }
    let norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::data("nrmse is undefined for an all-zero target"));
    }
    let diff = pred.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(100.0 * diff / norm)
}
