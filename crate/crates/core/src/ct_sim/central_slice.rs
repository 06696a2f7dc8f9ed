use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::image::Image;
use super::radon::project_angle;
use super::sinogram::SinogramGeometry;
use crate::error::Result;

/// Radial magnitude profiles compared by [`central_slice_check`].
#[derive(Debug, Clone)]
pub struct SliceProfiles {
    /// Radial frequencies in cycles per unit length.
    pub frequencies: Vec<f64>,
    /// |1D FT| of the projection at each frequency.
    pub projection: Vec<f64>,
    /// |2D FT| of the image interpolated along the same radial line.
    pub image: Vec<f64>,
}

/// Builds both magnitude profiles over the central half of the frequency band.
///
/// The projection spectrum is a discrete-time Fourier sum over detector bins.
/// The image spectrum is the 2D discrete-time Fourier sum over pixels,
/// evaluated exactly on the radial line and multiplied by the transform of
/// the bilinear interpolation kernel, i.e. the spectrum of the continuous
/// image the projector integrates. Both are in continuous-FT units.
pub fn slice_profiles(image: &Image, angle: f64) -> Result<SliceProfiles> {
    let n = image.size();
    let fov = image.fov();
    let geom = SinogramGeometry::for_image(n, fov, 1)?;
    let proj = project_angle(image, &geom, angle);
    let px = image.pixel_size();
    let coords: Vec<(f64, f64)> = (0..n).map(|i| image.pixel_center(i, i)).collect();

    let half = (n / 4) as i64;
    let step = 1.0 / fov;
    let (sin, cos) = angle.sin_cos();
    let mut frequencies = Vec::new();
    let mut projection = Vec::new();
    let mut image_mag = Vec::new();
    for m in -half..=half {
        let w = m as f64 * step;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &p) in proj.iter().enumerate() {
            acc += Complex64::from_polar(p, -2.0 * PI * w * geom.detector_offset(j));
        }
        projection.push(acc.norm() * geom.detector_spacing);

        let (u, v) = (w * cos, w * sin);
        let col_phase: Vec<Complex64> = coords
            .iter()
            .map(|&(x, _)| Complex64::from_polar(1.0, -2.0 * PI * u * x))
            .collect();
        let mut total = Complex64::new(0.0, 0.0);
        for (r, row) in image.values().chunks(n).enumerate() {
            let inner: Complex64 = row.iter().zip(&col_phase).map(|(&f, &e)| e * f).sum();
            total += inner * Complex64::from_polar(1.0, -2.0 * PI * v * coords[r].1);
        }
        let kernel = (sinc(u * px) * sinc(v * px)).powi(2);
        image_mag.push(total.norm() * px * px * kernel);
        frequencies.push(w);
    }
    Ok(SliceProfiles {
        frequencies,
        projection,
        image: image_mag,
    })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Normalized cross-correlation between the projection spectrum and the
/// matching radial slice of the image spectrum.
///
/// Returns 1.0 when either profile is constant (zero variance).
pub fn central_slice_check(image: &Image, angle: f64) -> Result<f64> {
    let profiles = slice_profiles(image, angle)?;
    Ok(pearson_or_one(&profiles.projection, &profiles.image))
}

fn pearson_or_one(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    let flat = |s: f64, m: f64| s <= 1e-20 * (m * m * n).max(f64::MIN_POSITIVE);
    if flat(saa, ma) || flat(sbb, mb) {
        return 1.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}
