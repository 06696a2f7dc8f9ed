use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parallel-beam acquisition geometry.
///
/// Angles are uniformly spaced over `[0, pi)`; detector bins are centered
/// on the rotation axis, bin `j` sitting at offset
/// `(j - (n_detectors - 1) / 2) * detector_spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinogramGeometry {
    pub n_angles: usize,
    pub n_detectors: usize,
    pub detector_spacing: f64,
    /// Physical width of the reconstructed field of view.
    pub fov: f64,
    /// Ray integration step in pixels.
    #[serde(default = "default_step")]
    pub step_pixels: f64,
}

fn default_step() -> f64 {
    0.5
}

impl SinogramGeometry {
    /// Geometry for a `size x size` image: one detector bin per pixel width,
    /// enough bins to cover the field-of-view diagonal.
    pub fn for_image(size: usize, fov: f64, n_angles: usize) -> Result<Self> {
        let spacing = fov / size as f64;
        let mut n_det = ((2f64).sqrt() * size as f64).ceil() as usize + 2;
        if n_det % 2 == 0 {
            n_det += 1;
        }
        let geom = SinogramGeometry {
            n_angles,
            n_detectors: n_det,
            detector_spacing: spacing,
            fov,
            step_pixels: default_step(),
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Same field of view with `factor` detector bins per pixel.
    pub fn oversampled(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("detector oversampling factor must be positive"));
        }
        let mut n_det = self.n_detectors * factor;
        if n_det % 2 == 0 {
            n_det += 1;
        }
        let geom = SinogramGeometry {
            n_detectors: n_det,
            detector_spacing: self.detector_spacing / factor as f64,
            ..self.clone()
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_angles < 1 {
            return Err(Error::invalid("geometry needs at least one angle"));
        }
        if self.n_detectors < 3 {
            return Err(Error::invalid("geometry needs at least three detector bins"));
        }
        if !(self.detector_spacing > 0.0 && self.fov > 0.0) {
            return Err(Error::invalid("detector spacing and fov must be positive"));
        }
        let span = (self.n_detectors - 1) as f64 * self.detector_spacing;
        if span + 1e-9 < (2f64).sqrt() * self.fov {
            return Err(Error::invalid(format!(
                "detector span {span:.4} does not cover the FOV diagonal {:.4}",
                (2f64).sqrt() * self.fov
            )));
        }
        if !(self.step_pixels > 0.0 && self.step_pixels <= 0.5) {
            return Err(Error::invalid("ray step must lie in (0, 0.5] pixels"));
        }
        Ok(())
    }

    #[inline]
    pub fn angle(&self, i: usize) -> f64 {
        PI * i as f64 / self.n_angles as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_angles).map(|i| self.angle(i)).collect()
    }

    #[inline]
    pub fn detector_offset(&self, j: usize) -> f64 {
        (j as f64 - (self.n_detectors - 1) as f64 / 2.0) * self.detector_spacing
    }
}

/// Line integrals, `n_angles x n_detectors`, row-major by angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub geometry: SinogramGeometry,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(geometry: SinogramGeometry) -> Self {
        let n = geometry.n_angles * geometry.n_detectors;
        Sinogram {
            geometry,
            values: vec![0.0; n],
        }
    }

    pub fn from_vec(geometry: SinogramGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.n_angles * geometry.n_detectors {
            return Err(Error::shape(format!(
                "sinogram needs {} values, got {}",
                geometry.n_angles * geometry.n_detectors,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("sinogram contains non-finite values"));
        }
        Ok(Sinogram { geometry, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, angle: usize) -> &[f64] {
        let n = self.geometry.n_detectors;
        &self.values[angle * n..(angle + 1) * n]
    }

    pub fn row_mut(&mut self, angle: usize) -> &mut [f64] {
        let n = self.geometry.n_detectors;
        &mut self.values[angle * n..(angle + 1) * n]
    }

    /// Elementwise `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Sinogram, beta: f64) -> Result<Sinogram> {
        if self.geometry != other.geometry {
            return Err(Error::shape("sinogram geometries differ"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Sinogram {
            geometry: self.geometry.clone(),
            values,
        })
    }
}
