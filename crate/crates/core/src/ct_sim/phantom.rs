use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::image::Image;
use crate::error::{Error, Result};

/// Ellipse in normalized field-of-view coordinates (`[-1, 1]` spans the FOV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center_x: f64,
    pub center_y: f64,
    /// Semi-axis along the (rotated) x direction.
    pub a: f64,
    /// Semi-axis along the (rotated) y direction.
    pub b: f64,
    /// Counter-clockwise rotation in radians.
    #[serde(default)]
    pub angle: f64,
    /// Additive attenuation per unit FOV length.
    pub value: f64,
}

impl Ellipse {
    pub fn new(center_x: f64, center_y: f64, a: f64, b: f64, angle: f64, value: f64) -> Self {
        Ellipse {
            center_x,
            center_y,
            a,
            b,
            angle,
            value,
        }
    }

    #[inline]
    pub fn contains(&self, u: f64, v: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let du = u - self.center_x;
        let dv = v - self.center_y;
        let p = du * c + dv * s;
        let q = -du * s + dv * c;
        (p / self.a).powi(2) + (q / self.b).powi(2) <= 1.0
    }
}

/// Small contrast-enhanced disk (a vessel cross-section).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vessel {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub value: f64,
}

/// Declarative phantom: a sum of ellipse and vessel indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub ellipses: Vec<Ellipse>,
    #[serde(default)]
    pub vessels: Vec<Vessel>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterOptions {
    /// Sub-samples per pixel edge; 1 disables anti-aliasing.
    pub supersample: usize,
    /// Physical width of the field of view.
    pub fov: f64,
}

impl Default for RasterOptions {
    fn default() -> Self {
        RasterOptions {
            supersample: 1,
            fov: 1.0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ellipses.is_empty() {
            return Err(Error::invalid("phantom needs at least one ellipse"));
        }
        for (i, e) in self.ellipses.iter().enumerate() {
            if !(e.a > 0.0 && e.b > 0.0) {
                return Err(Error::invalid(format!(
                    "ellipse {i} has non-positive semi-axis ({}, {})",
                    e.a, e.b
                )));
            }
            let finite = [e.center_x, e.center_y, e.angle, e.value]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid(format!("ellipse {i} has non-finite fields")));
            }
        }
        for (i, v) in self.vessels.iter().enumerate() {
            if !(v.radius > 0.0) {
                return Err(Error::invalid(format!("vessel {i} has non-positive radius")));
            }
        }
        Ok(())
    }

    /// Summed attenuation at normalized coordinates `(u, v)`.
    pub fn value_at(&self, u: f64, v: f64) -> f64 {
        let mut total = 0.0;
        for e in &self.ellipses {
            if e.contains(u, v) {
                total += e.value;
            }
        }
        for ves in &self.vessels {
            let du = u - ves.center_x;
            let dv = v - ves.center_y;
            if du * du + dv * dv <= ves.radius * ves.radius {
                total += ves.value;
            }
        }
        total
    }

    /// The original Shepp-Logan head phantom (Kak & Slaney table).
    pub fn shepp_logan() -> Self {
        Self::shepp_logan_with_values([2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01])
    }

    /// Higher-contrast variant (Toft) commonly used for display.
    pub fn modified_shepp_logan() -> Self {
        Self::shepp_logan_with_values([1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1])
    }

    fn shepp_logan_with_values(values: [f64; 10]) -> Self {
        let deg = std::f64::consts::PI / 180.0;
        let geometry: [(f64, f64, f64, f64, f64); 10] = [
            (0.0, 0.0, 0.69, 0.92, 0.0),
            (0.0, -0.0184, 0.6624, 0.874, 0.0),
            (0.22, 0.0, 0.11, 0.31, -18.0),
            (-0.22, 0.0, 0.16, 0.41, 18.0),
            (0.0, 0.35, 0.21, 0.25, 0.0),
            (0.0, 0.1, 0.046, 0.046, 0.0),
            (0.0, -0.1, 0.046, 0.046, 0.0),
            (-0.08, -0.605, 0.046, 0.023, 0.0),
            (0.0, -0.605, 0.023, 0.023, 0.0),
            (0.06, -0.605, 0.023, 0.046, 0.0),
        ];
        let ellipses = geometry
            .iter()
            .zip(values)
            .map(|(&(cx, cy, a, b, ang), value)| Ellipse::new(cx, cy, a, b, ang * deg, value))
            .collect();
        PhantomSpec {
            ellipses,
            vessels: Vec::new(),
        }
    }

    /// Single centered disk of the given normalized radius.
    pub fn disk(radius: f64, value: f64) -> Self {
        PhantomSpec {
            ellipses: vec![Ellipse::new(0.0, 0.0, radius, radius, 0.0, value)],
            vessels: Vec::new(),
        }
    }
}

/// Rasterizes a phantom on a `size x size` grid with unit field of view.
pub fn make_phantom(spec: &PhantomSpec, size: usize) -> Result<Image> {
    make_phantom_with(spec, size, &RasterOptions::default())
}

pub fn make_phantom_with(spec: &PhantomSpec, size: usize, opts: &RasterOptions) -> Result<Image> {
    spec.validate()?;
    if size < 16 {
        return Err(Error::invalid(format!("phantom size must be at least 16, got {size}")));
    }
    if opts.supersample == 0 {
        return Err(Error::invalid("supersample factor must be at least 1"));
    }
    let ss = opts.supersample;
    let n = size as f64;
    let weight = 1.0 / (ss * ss) as f64;
    let mut values = vec![0.0; size * size];
    for row in 0..size {
        for col in 0..size {
            let mut acc = 0.0;
            for sr in 0..ss {
                for sc in 0..ss {
                    let fr = row as f64 + (sr as f64 + 0.5) / ss as f64;
                    let fc = col as f64 + (sc as f64 + 0.5) / ss as f64;
                    // normalized coordinates, y pointing up
                    let u = 2.0 * fc / n - 1.0;
                    let v = 1.0 - 2.0 * fr / n;
                    acc += spec.value_at(u, v);
                }
            }
            values[row * size + col] = acc * weight;
        }
    }
    if let Some(neg) = values.iter().position(|&v| v < -1e-12) {
        return Err(Error::invalid(format!(
            "phantom has negative summed attenuation {} at pixel {neg}",
            values[neg]
        )));
    }
    Image::from_vec(size, opts.fov, values)
}

/// Attenuation levels (per unit FOV length) for the synthetic abdomen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TissueLevels {
    pub water: f64,
    /// Fraction of water attenuation for subcutaneous fat.
    pub fat: f64,
    /// Extra attenuation (fraction of water) of enhanced parenchyma.
    pub liver: f64,
    pub kidney: f64,
    pub bone: f64,
    pub vessel: f64,
}

impl Default for TissueLevels {
    fn default() -> Self {
        TissueLevels {
            water: 8.0,
            fat: 0.9,
            liver: 0.08,
            kidney: 0.15,
            bone: 0.7,
            vessel: 0.35,
        }
    }
}

/// Generates contrast-enhanced abdominal phantoms, one per (subject, slice).
///
/// Each subject draws its anatomy once; slices vary the organ extents
/// smoothly along the axial direction so neighbouring slices are similar.
#[derive(Debug, Clone)]
pub struct AbdomenGenerator {
    pub levels: TissueLevels,
    pub seed: u64,
}

impl AbdomenGenerator {
    pub fn new(seed: u64) -> Self {
        AbdomenGenerator {
            levels: TissueLevels::default(),
            seed,
        }
    }

    pub fn slice(&self, subject: u32, slice: u32, n_slices: u32) -> PhantomSpec {
        let w = self.levels.water;
        let lv = &self.levels;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (u64::from(subject) << 32) ^ 0x5eed_ab0d);
        // subject anatomy
        let body_a = rng.gen_range(0.76..0.88);
        let body_b = rng.gen_range(0.54..0.66);
        let fat_thick = rng.gen_range(0.03..0.07);
        let liver_cx = rng.gen_range(-0.42..-0.30);
        let liver_cy = rng.gen_range(0.0..0.12);
        let liver_a = rng.gen_range(0.28..0.36);
        let liver_b = rng.gen_range(0.24..0.32);
        let liver_tilt = rng.gen_range(-0.4..0.1);
        let spleen_cx = rng.gen_range(0.36..0.46);
        let kidney_y = rng.gen_range(-0.22..-0.12);
        let spine_y = rng.gen_range(-0.40..-0.34);
        let gas_x = rng.gen_range(-0.05..0.25);
        let n_hepatic = rng.gen_range(2..5);
        let hepatic: Vec<(f64, f64, f64)> = (0..n_hepatic)
            .map(|_| {
                (
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(0.015..0.03),
                )
            })
            .collect();

        // axial position in [0, 1]
        let z = if n_slices > 1 {
            f64::from(slice) / f64::from(n_slices - 1)
        } else {
            0.5
        };
        let mut jitter = ChaCha8Rng::seed_from_u64(
            self.seed ^ (u64::from(subject) << 32) ^ (u64::from(slice) << 8) ^ 0x51_1ce,
        );
        let j = |r: &mut ChaCha8Rng| r.gen_range(-0.01..0.01);

        let mut ellipses = Vec::new();
        let mut vessels = Vec::new();
        // body: fat envelope plus soft-tissue core
        ellipses.push(Ellipse::new(0.0, 0.0, body_a, body_b, 0.0, lv.fat * w));
        ellipses.push(Ellipse::new(
            0.0,
            0.0,
            body_a - fat_thick,
            body_b - fat_thick,
            0.0,
            (1.0 - lv.fat) * w,
        ));
        // liver shrinks toward the inferior end
        let liver_scale = 1.0 - 0.6 * z;
        let la = liver_a * liver_scale;
        let lb = liver_b * liver_scale;
        ellipses.push(Ellipse::new(
            liver_cx + j(&mut jitter),
            liver_cy + j(&mut jitter),
            la,
            lb,
            liver_tilt,
            lv.liver * w,
        ));
        for &(hx, hy, hr) in &hepatic {
            vessels.push(Vessel {
                center_x: liver_cx + hx * la,
                center_y: liver_cy + hy * lb,
                radius: hr,
                value: lv.vessel * 0.6 * w,
            });
        }
        // spleen on the opposite side, superior slices only
        if z < 0.6 {
            let s = 1.0 - z / 0.6;
            ellipses.push(Ellipse::new(
                spleen_cx,
                0.05,
                0.06 + 0.08 * s,
                0.10 + 0.08 * s,
                0.5,
                lv.liver * w,
            ));
        }
        // kidneys appear mid-abdomen
        if (0.3..0.9).contains(&z) {
            let t = ((z - 0.3) / 0.6 * std::f64::consts::PI).sin();
            for side in [-1.0, 1.0] {
                ellipses.push(Ellipse::new(
                    side * 0.30,
                    kidney_y,
                    0.05 + 0.04 * t,
                    0.08 + 0.05 * t,
                    side * 0.5,
                    lv.kidney * w,
                ));
            }
        }
        // vertebral body, canal and aorta/IVC
        ellipses.push(Ellipse::new(0.0, spine_y, 0.11, 0.09, 0.0, lv.bone * w));
        ellipses.push(Ellipse::new(0.0, spine_y - 0.13, 0.04, 0.035, 0.0, lv.bone * 0.5 * w));
        vessels.push(Vessel {
            center_x: 0.06,
            center_y: spine_y + 0.15,
            radius: 0.045 - 0.01 * z,
            value: lv.vessel * w,
        });
        vessels.push(Vessel {
            center_x: -0.12,
            center_y: spine_y + 0.16,
            radius: 0.05,
            value: lv.vessel * 0.8 * w,
        });
        // bowel gas anteriorly, well inside the soft-tissue core
        if z > 0.2 {
            ellipses.push(Ellipse::new(
                gas_x + j(&mut jitter),
                0.30 - 0.1 * z,
                0.05 + 0.03 * z,
                0.03,
                0.3,
                -0.85 * w,
            ));
        }
        PhantomSpec { ellipses, vessels }
    }
}
