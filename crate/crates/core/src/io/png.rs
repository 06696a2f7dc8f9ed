use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};

/// Writes `values` (row-major, expected in `[0, 1]`) as 16-bit grayscale.
pub fn write_png16(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::shape(format!(
            "{width}x{height} image needs {} values, got {}",
            width * height,
            values.len()
        )));
    }
    let pixels: Vec<u16> = values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * f64::from(u16::MAX)).round() as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, pixels).expect("buffer length checked");
    buf.save(path)?;
    Ok(())
}

/// Lays square tiles side by side with a `gap`-pixel black separator.
pub fn tile_row(tiles: &[Vec<f64>], size: usize, gap: usize) -> Result<(usize, usize, Vec<f64>)> {
    if tiles.is_empty() {
        return Err(Error::invalid("montage needs at least one tile"));
    }
    if tiles.iter().any(|t| t.len() != size * size) {
        return Err(Error::shape("every montage tile must be size x size"));
    }
    let width = tiles.len() * size + (tiles.len() - 1) * gap;
    let mut out = vec![0.0; width * size];
    for (k, t) in tiles.iter().enumerate() {
        let x0 = k * (size + gap);
        for r in 0..size {
            out[r * width + x0..r * width + x0 + size].copy_from_slice(&t[r * size..(r + 1) * size]);
        }
    }
    Ok((width, size, out))
}
