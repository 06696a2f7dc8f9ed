use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::image::Image;
use super::sinogram::{Sinogram, SinogramGeometry};
use crate::error::{Error, Result};

/// Apodization applied on top of the ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampWindow {
    #[default]
    Ramlak,
    Hann,
}

fn check_geometry(image: &Image, geom: &SinogramGeometry) -> Result<()> {
    geom.validate()?;
    if (image.fov() - geom.fov).abs() > 1e-12 * geom.fov {
        return Err(Error::invalid(format!(
            "image fov {} does not match geometry fov {}",
            image.fov(),
            geom.fov
        )));
    }
    Ok(())
}

/// Line integrals of `image` at one angle for every detector bin.
///
/// Each ray is sampled with bilinear interpolation at a step of at most
/// `geom.step_pixels` pixels and summed with the midpoint rule.
pub fn project_angle(image: &Image, geom: &SinogramGeometry, angle: f64) -> Vec<f64> {
    let px = image.pixel_size();
    let half_diag = image.fov() * std::f64::consts::FRAC_1_SQRT_2;
    let n_steps = ((2.0 * half_diag) / (geom.step_pixels * px)).ceil() as usize;
    let dt = 2.0 * half_diag / n_steps as f64;
    let (sin, cos) = angle.sin_cos();
    (0..geom.n_detectors)
        .map(|j| {
            let s = geom.detector_offset(j);
            let (x0, y0) = (s * cos, s * sin);
            let mut acc = 0.0;
            for k in 0..n_steps {
                let t = -half_diag + (k as f64 + 0.5) * dt;
                acc += image.sample(x0 - t * sin, y0 + t * cos);
            }
            acc * dt
        })
        .collect()
}

/// Parallel-beam forward projection.
pub fn radon(image: &Image, geom: &SinogramGeometry) -> Result<Sinogram> {
    check_geometry(image, geom)?;
    let mut sino = Sinogram::zeros(geom.clone());
    let n_det = geom.n_detectors;
    sino.values_mut()
        .par_chunks_mut(n_det)
        .enumerate()
        .for_each(|(i, row)| {
            row.copy_from_slice(&project_angle(image, geom, geom.angle(i)));
        });
    Ok(sino)
}

/// Zero-padded FFT length used by the ramp filter.
pub fn ramp_padded_len(n_detectors: usize) -> usize {
    (2 * n_detectors.next_power_of_two()).max(64)
}

/// Frequency response of the band-limited ramp on a padded grid.
///
/// Built as the DFT of the spatial kernel `h[0] = 1/4`, `h[odd n] =
/// -1/(pi^2 n^2)`, `h[even n] = 0`, so the filtered row equals a linear
/// convolution with that kernel (no circular wrap for rows up to half
/// the padded length).
pub fn ramp_response(padded: usize, window: RampWindow) -> Vec<f64> {
    let mut kernel: Vec<Complex64> = (0..padded)
        .map(|i| {
            let n = if i <= padded / 2 {
                i as i64
            } else {
                i as i64 - padded as i64
            };
            let v = if n == 0 {
                0.25
            } else if n % 2 != 0 {
                -1.0 / (PI * PI * (n * n) as f64)
            } else {
                0.0
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut kernel);
    kernel
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let f = if i <= padded / 2 {
                i as f64 / padded as f64
            } else {
                i as f64 / padded as f64 - 1.0
            };
            let w = match window {
                RampWindow::Ramlak => 1.0,
                RampWindow::Hann => 0.5 * (1.0 + (2.0 * PI * f).cos()),
            };
            h.re * w
        })
        .collect()
}

/// Filters one projection row, returning the full zero-padded convolution
/// (length `response.len()`); the first `row.len()` entries are the
/// in-field output.
pub fn filter_row_padded(row: &[f64], response: &[f64], spacing: f64) -> Vec<f64> {
    let padded = response.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = row
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(padded)
        .collect();
    planner.plan_fft_forward(padded).process(&mut buf);
    for (b, h) in buf.iter_mut().zip(response) {
        *b *= *h;
    }
    planner.plan_fft_inverse(padded).process(&mut buf);
    let norm = 1.0 / (spacing * padded as f64);
    buf.iter().map(|c| c.re * norm).collect()
}

/// Ramp-filters every projection along the detector axis.
pub fn ramp_filter(sino: &Sinogram, window: RampWindow) -> Result<Sinogram> {
    let geom = &sino.geometry;
    if geom.n_detectors < 3 {
        return Err(Error::invalid("ramp filter needs at least three detector bins"));
    }
    let n_det = geom.n_detectors;
    let response = ramp_response(ramp_padded_len(n_det), window);
    let spacing = geom.detector_spacing;
    let mut out = sino.clone();
    out.values_mut().par_chunks_mut(n_det).for_each(|row| {
        let full = filter_row_padded(row, &response, spacing);
        row.copy_from_slice(&full[..n_det]);
    });
    Ok(out)
}

/// Smears (filtered) projections back across a `size x size` grid.
///
/// Pixel value is `(pi / n_angles) * sum_i q_i(s)` where `s = x cos + y sin`
/// and `q_i` is linearly interpolated between detector bins.
pub fn backproject(filtered: &Sinogram, size: usize) -> Result<Image> {
    let geom = &filtered.geometry;
    geom.validate()?;
    if size == 0 {
        return Err(Error::invalid("image size must be positive"));
    }
    let mut image = Image::zeros(size, geom.fov);
    let trig: Vec<(f64, f64)> = (0..geom.n_angles).map(|i| geom.angle(i).sin_cos()).collect();
    let center = (geom.n_detectors - 1) as f64 / 2.0;
    let inv_d = 1.0 / geom.detector_spacing;
    let last = geom.n_detectors as isize - 1;
    let weight = PI / geom.n_angles as f64;
    let probe = Image::zeros(size, geom.fov);
    image
        .values_mut()
        .par_chunks_mut(size)
        .enumerate()
        .for_each(|(row, out)| {
            for (col, dst) in out.iter_mut().enumerate() {
                let (x, y) = probe.pixel_center(row, col);
                let mut acc = 0.0;
                for (i, &(sin, cos)) in trig.iter().enumerate() {
                    let pos = (x * cos + y * sin) * inv_d + center;
                    let j0 = pos.floor();
                    let frac = pos - j0;
                    let j0 = j0 as isize;
                    if j0 < 0 || j0 > last {
                        continue;
                    }
                    let q = filtered.row(i);
                    let a = q[j0 as usize];
                    let b = if j0 < last { q[j0 as usize + 1] } else { 0.0 };
                    acc += a * (1.0 - frac) + b * frac;
                }
                *dst = acc * weight;
            }
        });
    Ok(image)
}

/// Filtered back projection with the reconstruction circle applied.
pub fn fbp(sino: &Sinogram, size: usize, window: RampWindow) -> Result<Image> {
    let filtered = ramp_filter(sino, window)?;
    let mut image = backproject(&filtered, size)?;
    image.apply_circle_mask();
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ct_sim::phantom::PhantomSpec;

    fn geom(size: usize, n_angles: usize) -> SinogramGeometry {
        SinogramGeometry::for_image(size, 1.0, n_angles).unwrap()
    }

    #[test]
    fn zero_inputs_give_zero_outputs() {
        let g = geom(32, 12);
        let sino = radon(&Image::zeros(32, 1.0), &g).unwrap();
        assert!(sino.values().iter().all(|&v| v == 0.0));
        let filtered = ramp_filter(&sino, RampWindow::Ramlak).unwrap();
        assert!(filtered.values().iter().all(|&v| v == 0.0));
        let back = backproject(&filtered, 32).unwrap();
        assert!(back.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramlak_dc_gain_is_the_truncated_kernel_residue() {
        let padded = ramp_padded_len(45);
        let response = ramp_response(padded, RampWindow::Ramlak);
        let half = (padded / 2) as i64;
        let tail: f64 = (1..half).filter(|n| n % 2 != 0).map(|n| 1.0 / (n * n) as f64).sum();
        let residue = 0.25 - 2.0 * tail / (PI * PI);
        assert!((response[0] - residue).abs() < 1e-12);
        assert!(response[0].abs() < 1e-2 * response[padded / 2]);

        let row = vec![2.5; 45];
        let full = filter_row_padded(&row, &response, 0.1);
        let mean = full.iter().sum::<f64>() / full.len() as f64;
        let expected = 2.5 * 45.0 * residue / (0.1 * padded as f64);
        assert!((mean - expected).abs() < 1e-9, "mean {mean} vs {expected}");
    }

    #[test]
    fn impulse_response_is_the_discrete_ramp_kernel() {
        let n = 41;
        let spacing = 0.02;
        let mut row = vec![0.0; n];
        row[20] = 1.0;
        let response = ramp_response(ramp_padded_len(n), RampWindow::Ramlak);
        let out = filter_row_padded(&row, &response, spacing);
        for (j, &v) in out[..n].iter().enumerate() {
            let k = j as i64 - 20;
            let h = if k == 0 {
                0.25
            } else if k % 2 != 0 {
                -1.0 / (PI * PI * (k * k) as f64)
            } else {
                0.0
            };
            assert!((v - h / spacing).abs() < 1e-12 * 0.25 / spacing, "bin {j}: {v} vs {}", h / spacing);
        }
    }

    #[test]
    fn hann_attenuates_high_frequencies() {
        let r = ramp_response(64, RampWindow::Ramlak);
        let h = ramp_response(64, RampWindow::Hann);
        assert!((r[1] - h[1]).abs() < 0.01 * r[1]);
        assert!(h[32].abs() < 1e-12);
        assert!(r[32] > 0.4);
    }

    #[test]
    fn disk_projection_is_rotation_invariant() {
        let opts = crate::ct_sim::RasterOptions { supersample: 8, fov: 1.0 };
        let img = crate::ct_sim::make_phantom_with(&PhantomSpec::disk(0.5, 1.0), 128, &opts).unwrap();
        let sino = radon(&img, &geom(128, 16)).unwrap();
        let norm = sino.row(0).iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 1..16 {
            let diff = sino.row(0).iter().zip(sino.row(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(diff < 0.005 * norm, "angle {i}: relative difference {}", diff / norm);
        }
    }

    #[test]
    fn mismatched_fov_is_rejected() {
        let img = Image::zeros(32, 2.0);
        assert!(radon(&img, &geom(32, 4)).is_err());
    }
}
