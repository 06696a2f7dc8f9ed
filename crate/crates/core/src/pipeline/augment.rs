use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ct_sim::image::bilinear;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Integer translation drawn uniformly from `-max_shift..=max_shift` px.
    pub max_shift: i32,
    pub max_rotation_deg: f64,
    pub flip_probability: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: true,
            max_shift: 16,
            max_rotation_deg: 10.0,
            flip_probability: 0.5,
        }
    }
}

/// One geometric transform: flips, then rotation about the centre, then
/// translation. Uncovered pixels are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub shift_rows: i32,
    pub shift_cols: i32,
    pub rotation_deg: f64,
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
}

impl Transform {
    pub fn identity() -> Self {
        Transform {
            shift_rows: 0,
            shift_cols: 0,
            rotation_deg: 0.0,
            flip_horizontal: false,
            flip_vertical: false,
        }
    }

    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> Self {
        if !cfg.enabled {
            return Transform::identity();
        }
        let s = cfg.max_shift.max(0);
        Transform {
            shift_rows: rng.gen_range(-s..=s),
            shift_cols: rng.gen_range(-s..=s),
            rotation_deg: if cfg.max_rotation_deg > 0.0 {
                rng.gen_range(-cfg.max_rotation_deg..=cfg.max_rotation_deg)
            } else {
                0.0
            },
            flip_horizontal: rng.gen_bool(cfg.flip_probability),
            flip_vertical: rng.gen_bool(cfg.flip_probability),
        }
    }

    /// Source coordinate (before translation and rotation) of output pixel.
    fn unflip(&self, r: usize, c: usize, n: usize) -> (usize, usize) {
        let r = if self.flip_vertical { n - 1 - r } else { r };
        let c = if self.flip_horizontal { n - 1 - c } else { c };
        (r, c)
    }

    pub fn apply(&self, plane: &[f32], size: usize) -> Vec<f32> {
        let n = size as i64;
        let mut out = vec![0.0f32; size * size];
        if self.rotation_deg == 0.0 {
            for r in 0..size {
                for c in 0..size {
                    let (sr, sc) = (r as i64 - self.shift_rows as i64, c as i64 - self.shift_cols as i64);
                    if (0..n).contains(&sr) && (0..n).contains(&sc) {
                        let (fr, fc) = self.unflip(sr as usize, sc as usize, size);
                        out[r * size + c] = plane[fr * size + fc];
                    }
                }
            }
            return out;
        }
        let flipped: Vec<f64> = (0..size * size)
            .map(|i| {
                let (fr, fc) = self.unflip(i / size, i % size, size);
                f64::from(plane[fr * size + fc])
            })
            .collect();
        let (s, co) = self.rotation_deg.to_radians().sin_cos();
        let centre = (size as f64 - 1.0) / 2.0;
        for r in 0..size {
            for c in 0..size {
                let y = (r as f64 - self.shift_rows as f64) - centre;
                let x = (c as f64 - self.shift_cols as f64) - centre;
                // inverse rotation (counter-clockwise on screen for positive angles)
                let sx = co * x - s * y;
                let sy = s * x + co * y;
                out[r * size + c] = bilinear(&flipped, size, sy + centre, sx + centre) as f32;
            }
        }
        out
    }
}

/// Applies one sampled transform identically to both members of a pair.
pub fn augment<R: Rng + ?Sized>(
    input: &[f32],
    target: &[f32],
    size: usize,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> (Vec<f32>, Vec<f32>) {
    let t = Transform::sample(cfg, rng);
    (t.apply(input, size), t.apply(target, size))
}
