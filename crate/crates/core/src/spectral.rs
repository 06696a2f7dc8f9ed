//! 2D Fourier conventions shared by the simulator and the Fourier-domain
//! network stages.
//!
//! Transforms are orthonormal (`1/sqrt(HW)` in both directions) so spectrum
//! magnitudes stay commensurate with image magnitudes. A spectrum carries a
//! layout flag recording whether DC sits at `(0, 0)` or at `(n/2, n/2)`.

use num_complex::Complex;
use rustfft::{FftDirection, FftNum, FftPlanner};

use crate::ct_sim::Image;
use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;

/// Residual imaginary magnitude above which `ifft2` logs a warning.
pub const IMAG_WARN_THRESHOLD: f64 = 1e-3;

/// In-place orthonormal 2D DFT of a row-major `n x n` buffer.
pub fn fft2_in_place<T: FftNum>(data: &mut [Complex<T>], n: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), n * n);
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft(n, direction);
    // rows
    fft.process(data);
    // columns via a scratch column buffer
    let mut column = vec![Complex::new(T::zero(), T::zero()); n];
    for c in 0..n {
        for r in 0..n {
            column[r] = data[r * n + c];
        }
        fft.process(&mut column);
        for r in 0..n {
            data[r * n + c] = column[r];
        }
    }
    let scale = T::from_f64(1.0 / n as f64).unwrap();
    for v in data.iter_mut() {
        *v = *v * scale;
    }
}

/// Rolls both axes by `offset` (mod n): `out[(r + o) % n][(c + o) % n] = in[r][c]`.
pub fn roll2<T: Copy>(data: &[T], n: usize, offset: usize) -> Vec<T> {
    let mut out = data.to_vec();
    for r in 0..n {
        let rr = (r + offset) % n;
        for c in 0..n {
            out[rr * n + (c + offset) % n] = data[r * n + c];
        }
    }
    out
}

/// Quadrant swap moving DC from `(0, 0)` to `(n/2, n/2)`.
pub fn shift_slice<T: Copy>(data: &[T], n: usize) -> Vec<T> {
    roll2(data, n, n / 2)
}

/// Inverse of [`shift_slice`] (identical for even `n`).
pub fn ishift_slice<T: Copy>(data: &[T], n: usize) -> Vec<T> {
    roll2(data, n, n - n / 2)
}

/// Complex square spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    size: usize,
    values: Vec<Complex64>,
    shifted: bool,
}

impl Spectrum {
    pub fn new(size: usize, values: Vec<Complex64>, shifted: bool) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::shape(format!(
                "spectrum of size {size} needs {} bins, got {}",
                size * size,
                values.len()
            )));
        }
        Ok(Spectrum {
            size,
            values,
            shifted,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn is_shifted(&self) -> bool {
        self.shifted
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.size + col]
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Orthonormal forward transform of a real image (DC at `(0, 0)`).
pub fn fft2(image: &Image) -> Result<Spectrum> {
    let n = image.size();
    let mut data: Vec<Complex64> = image.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut data, n, FftDirection::Forward);
    Spectrum::new(n, data, false)
}

/// Result of an inverse transform: the real part plus the largest
/// discarded imaginary magnitude.
#[derive(Debug, Clone)]
pub struct InverseResult {
    pub image: Image,
    pub max_imag: f64,
}

/// Orthonormal inverse transform keeping the real part.
///
/// Shifted spectra are un-shifted first. A residual imaginary component
/// above [`IMAG_WARN_THRESHOLD`] is logged, not rejected: network outputs are
/// not Hermitian in general.
pub fn ifft2(spectrum: &Spectrum, fov: f64) -> Result<InverseResult> {
    let n = spectrum.size;
    let mut data = if spectrum.shifted {
        ishift_slice(&spectrum.values, n)
    } else {
        spectrum.values.clone()
    };
    fft2_in_place(&mut data, n, FftDirection::Inverse);
    let max_imag = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if max_imag > IMAG_WARN_THRESHOLD {
        log::warn!("ifft2 discarded imaginary residual of magnitude {max_imag:.3e}");
    }
    let image = Image::from_vec(n, fov, data.iter().map(|c| c.re).collect())?;
    Ok(InverseResult { image, max_imag })
}

/// Quadrant swap; toggles the layout flag.
pub fn shift(spectrum: &Spectrum) -> Spectrum {
    Spectrum {
        size: spectrum.size,
        values: shift_slice(&spectrum.values, spectrum.size),
        shifted: !spectrum.shifted,
    }
}

/// Inverse quadrant swap; toggles the layout flag.
pub fn ishift(spectrum: &Spectrum) -> Spectrum {
    Spectrum {
        size: spectrum.size,
        values: ishift_slice(&spectrum.values, spectrum.size),
        shifted: !spectrum.shifted,
    }
}

/// Real/imaginary parts stacked as two real channels, `2 x n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    pub channels: usize,
    pub size: usize,
    pub data: Vec<f64>,
    pub shifted: bool,
}

impl ChannelPair {
    pub fn new(channels: usize, size: usize, data: Vec<f64>, shifted: bool) -> Result<Self> {
        if data.len() != channels * size * size {
            return Err(Error::shape(format!(
                "{channels} channels of {size}x{size} need {} values, got {}",
                channels * size * size,
                data.len()
            )));
        }
        Ok(ChannelPair {
            channels,
            size,
            data,
            shifted,
        })
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.size * self.size;
        &self.data[c * plane..(c + 1) * plane]
    }
}

pub fn pack(spectrum: &Spectrum) -> ChannelPair {
    let plane = spectrum.size * spectrum.size;
    let mut data = Vec::with_capacity(2 * plane);
    data.extend(spectrum.values.iter().map(|c| c.re));
    data.extend(spectrum.values.iter().map(|c| c.im));
    ChannelPair {
        channels: 2,
        size: spectrum.size,
        data,
        shifted: spectrum.shifted,
    }
}

pub fn unpack(pair: &ChannelPair) -> Result<Spectrum> {
    if pair.channels != 2 {
        return Err(Error::shape(format!(
            "spectrum unpacking needs exactly 2 channels, got {}",
            pair.channels
        )));
    }
    let plane = pair.size * pair.size;
    if pair.data.len() != 2 * plane {
        return Err(Error::shape("channel pair payload has the wrong length"));
    }
    let values = pair.data[..plane]
        .iter()
        .zip(&pair.data[plane..])
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    Spectrum::new(pair.size, values, pair.shifted)
}
