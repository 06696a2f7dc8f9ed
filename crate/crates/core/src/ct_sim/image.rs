use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square grid of attenuation values, row-major with row 0 at the top.
///
/// Pixel `(row, col)` has its center at
/// `x = (col + 0.5 - n/2) * pixel`, `y = (n/2 - row - 0.5) * pixel`
/// in physical units, with the origin at the rotation center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    size: usize,
    fov: f64,
    values: Vec<f64>,
}

impl Image {
    pub fn zeros(size: usize, fov: f64) -> Self {
        Image {
            size,
            fov,
            values: vec![0.0; size * size],
        }
    }

    pub fn from_vec(size: usize, fov: f64, values: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("image size must be positive"));
        }
        if values.len() != size * size {
            return Err(Error::shape(format!(
                "expected {} values for a {size}x{size} image, got {}",
                size * size,
                values.len()
            )));
        }
        if !(fov > 0.0 && fov.is_finite()) {
            return Err(Error::invalid(format!("field of view must be positive, got {fov}")));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite image value at index {bad}")));
        }
        Ok(Image { size, fov, values })
    }

    /// Builds an image from a `height x width` buffer, rejecting non-square shapes.
    pub fn from_rows(height: usize, width: usize, fov: f64, values: Vec<f64>) -> Result<Self> {
        if height != width {
            return Err(Error::shape(format!(
                "images must be square, got {height}x{width}"
            )));
        }
        Self::from_vec(height, fov, values)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn fov(&self) -> f64 {
        self.fov
    }

    #[inline]
    pub fn pixel_size(&self) -> f64 {
        self.fov / self.size as f64
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.size + col] = v;
    }

    /// Physical coordinates of a pixel center.
    #[inline]
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let half = self.size as f64 / 2.0;
        let px = self.pixel_size();
        ((col as f64 + 0.5 - half) * px, (half - row as f64 - 0.5) * px)
    }

    /// Bilinear sample at physical `(x, y)`; zero outside the grid.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let n = self.size as f64;
        let px = self.pixel_size();
        // continuous (col, row) coordinates of pixel centers
        let c = x / px + n / 2.0 - 0.5;
        let r = n / 2.0 - y / px - 0.5;
        bilinear(&self.values, self.size, r, c)
    }

    /// Integral of the image over its area (sum times pixel area).
    pub fn integral(&self) -> f64 {
        let px = self.pixel_size();
        self.values.iter().sum::<f64>() * px * px
    }

    /// Mask of pixels whose centers lie inside the inscribed disk.
    pub fn inscribed_disk_mask(&self) -> Vec<bool> {
        let radius = self.fov / 2.0;
        let mut mask = Vec::with_capacity(self.values.len());
        for row in 0..self.size {
            for col in 0..self.size {
                let (x, y) = self.pixel_center(row, col);
                mask.push(x * x + y * y <= radius * radius);
            }
        }
        mask
    }

    /// Zeroes every pixel outside the inscribed disk.
    pub fn apply_circle_mask(&mut self) {
        let mask = self.inscribed_disk_mask();
        for (v, inside) in self.values.iter_mut().zip(mask) {
            if !inside {
                *v = 0.0;
            }
        }
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn rot90(&self) -> Image {
        let n = self.size;
        let mut out = Image::zeros(n, self.fov);
        for row in 0..n {
            for col in 0..n {
                // (x, y) -> (-y, x)
                out.set(n - 1 - col, row, self.get(row, col));
            }
        }
        out
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Bilinear interpolation on a row-major `n x n` grid at fractional
/// `(row, col)`, treating everything outside the grid as zero.
#[inline]
pub(crate) fn bilinear(values: &[f64], n: usize, r: f64, c: f64) -> f64 {
    let r0 = r.floor();
    let c0 = c.floor();
    let fr = r - r0;
    let fc = c - c0;
    let r0 = r0 as isize;
    let c0 = c0 as isize;
    let n = n as isize;
    if r0 < -1 || c0 < -1 || r0 >= n || c0 >= n {
        return 0.0;
    }
    let at = |rr: isize, cc: isize| -> f64 {
        if rr < 0 || cc < 0 || rr >= n || cc >= n {
            0.0
        } else {
            values[(rr * n + cc) as usize]
        }
    };
    let top = at(r0, c0) * (1.0 - fc) + at(r0, c0 + 1) * fc;
    let bottom = at(r0 + 1, c0) * (1.0 - fc) + at(r0 + 1, c0 + 1) * fc;
    top * (1.0 - fr) + bottom * fr
}
