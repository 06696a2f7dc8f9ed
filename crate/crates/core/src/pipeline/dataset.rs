use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ct_sim::{make_pair_with, AbdomenGenerator, DoseModel, PairOptions, RampWindow, SinogramGeometry, TissueLevels};
use crate::error::{Error, Result};
use crate::io::{read_json, read_tensor, write_json, write_tensor};
use crate::nn::Tensor4;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Relative share of phantoms per split; phantoms are never divided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train: u32,
    pub validation: u32,
    pub test: u32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train: 5,
            validation: 2,
            test: 3,
        }
    }
}

impl SplitConfig {
    /// Phantom counts `(train, validation, test)` for `n` phantoms.
    pub fn counts(&self, n: usize) -> Result<(usize, usize, usize)> {
        let total = self.train + self.validation + self.test;
        if total == 0 || self.train == 0 {
            return Err(Error::invalid("split needs a non-zero training share"));
        }
        if n < 2 {
            return Err(Error::invalid("need at least two phantoms to split"));
        }
        let share = |p: u32| (n as f64 * f64::from(p) / f64::from(total)).round() as usize;
        let train = share(self.train).clamp(1, n - 1);
        let validation = if self.validation > 0 {
            share(self.validation).clamp(1, n - train)
        } else {
            0
        };
        Ok((train, validation, n - train - validation))
    }

    /// Split of each phantom id, from a seeded permutation.
    pub fn assign(&self, n: usize, seed: u64) -> Result<Vec<Split>> {
        let (tr, va, _) = self.counts(n)?;
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut out = vec![Split::Test; n];
        for (rank, &id) in ids.iter().enumerate() {
            out[id] = if rank < tr {
                Split::Train
            } else if rank < tr + va {
                Split::Validation
            } else {
                Split::Test
            };
        }
        Ok(out)
    }
}

/// Global affine map `v -> (v - low) / (high - low)` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub low: f64,
    pub high: f64,
}

impl NormalizationConfig {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(high > low) || !low.is_finite() || !high.is_finite() {
            return Err(Error::invalid(format!("normalization needs low < high, got [{low}, {high}]")));
        }
        Ok(NormalizationConfig { low, high })
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.low) / (self.high - self.low)
    }

    #[inline]
    pub fn invert(&self, u: f64) -> f64 {
        self.low + u * (self.high - self.low)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub size: usize,
    pub fov: f64,
    pub phantoms: usize,
    pub slices_per_phantom: usize,
    pub n_angles: usize,
    pub dose: DoseModel,
    pub levels: TissueLevels,
    pub supersample: usize,
    pub window: RampWindow,
    pub split: SplitConfig,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            size: 64,
            fov: 1.0,
            phantoms: 10,
            slices_per_phantom: 20,
            n_angles: 128,
            dose: DoseModel::default(),
            levels: TissueLevels::default(),
            supersample: 4,
            window: RampWindow::Ramlak,
            split: SplitConfig::default(),
            seed: 2024,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 16 || self.phantoms < 2 || self.slices_per_phantom == 0 || self.n_angles == 0 {
            return Err(Error::invalid(
                "dataset needs size >= 16, >= 2 phantoms, >= 1 slice and >= 1 angle",
            ));
        }
        if !(self.fov > 0.0) || self.supersample == 0 {
            return Err(Error::invalid("fov and supersample must be positive"));
        }
        self.dose.validate()?;
        self.split.counts(self.phantoms).map(|_| ())
    }
}

/// One normalized LDCT/RDCT pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub id: String,
    pub phantom: usize,
    pub index: usize,
    pub split: Split,
    pub ldct: Vec<f32>,
    pub rdct: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub normalization: NormalizationConfig,
    pub slices: Vec<Slice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceEntry {
    pub id: String,
    pub phantom: usize,
    pub index: usize,
    pub split: Split,
    pub ldct: String,
    pub rdct: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub config: DatasetConfig,
    pub normalization: NormalizationConfig,
    pub phantom_splits: Vec<Split>,
    pub slices: Vec<SliceEntry>,
}

fn slice_id(phantom: usize, index: usize) -> String {
    format!("p{phantom:02}_s{index:03}")
}

/// Simulates every slice (in parallel; each slice has its own seed stream)
/// and normalizes by the largest ground-truth attenuation.
pub fn build_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let splits = config.split.assign(config.phantoms, seeds::derive(config.seed, 7))?;
    let geom = SinogramGeometry::for_image(config.size, config.fov, config.n_angles)?;
    let gen = AbdomenGenerator {
        levels: config.levels,
        seed: seeds::derive(config.seed, 3),
    };
    let opts = PairOptions {
        window: config.window,
        noiseless_target: false,
        supersample: config.supersample,
    };
    let n_slices = config.slices_per_phantom;
    let jobs: Vec<(usize, usize)> = (0..config.phantoms)
        .flat_map(|p| (0..n_slices).map(move |s| (p, s)))
        .collect();
    let pairs = jobs
        .par_iter()
        .map(|&(p, s)| {
            let spec = gen.slice(p as u32, s as u32, n_slices as u32);
            let dose = config
                .dose
                .with_seed(seeds::derive_path(config.seed, &[11, p as u64, s as u64]));
            make_pair_with(&spec, &geom, &dose, config.size, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let high = pairs.iter().map(|c| c.truth.min_max().1).fold(f64::MIN, f64::max);
    let normalization = NormalizationConfig::new(0.0, high)?;
    let norm = |v: &[f64]| v.iter().map(|&x| normalization.apply(x) as f32).collect::<Vec<f32>>();
    let slices = jobs
        .iter()
        .zip(pairs)
        .map(|(&(p, s), pair)| Slice {
            id: slice_id(p, s),
            phantom: p,
            index: s,
            split: splits[p],
            ldct: norm(pair.ldct.values()),
            rdct: norm(pair.rdct.values()),
        })
        .collect();
    let ds = Dataset {
        config: config.clone(),
        normalization,
        slices,
    };
    ds.check_split_hygiene()?;
    Ok(ds)
}

impl Dataset {
    pub fn size(&self) -> usize {
        self.config.size
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.slices.len()).filter(|&i| self.slices[i].split == split).collect()
    }

    pub fn find(&self, id: &str) -> Option<&Slice> {
        self.slices.iter().find(|s| s.id == id)
    }

    /// No phantom may contribute slices to more than one split.
    pub fn check_split_hygiene(&self) -> Result<()> {
        let mut seen: std::collections::HashMap<usize, Split> = Default::default();
        for s in &self.slices {
            if let Some(prev) = seen.insert(s.phantom, s.split) {
                if prev != s.split {
                    return Err(Error::data(format!("phantom {} appears in two splits", s.phantom)));
                }
            }
        }
        Ok(())
    }

    /// Stacks the selected slices into `[n, 1, s, s]` LDCT and RDCT batches.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor4<f32>, Tensor4<f32>)> {
        let s = self.size();
        let mut l = Vec::with_capacity(indices.len() * s * s);
        let mut r = Vec::with_capacity(indices.len() * s * s);
        for &i in indices {
            l.extend_from_slice(&self.slices[i].ldct);
            r.extend_from_slice(&self.slices[i].rdct);
        }
        Ok((
            Tensor4::from_vec([indices.len(), 1, s, s], l)?,
            Tensor4::from_vec([indices.len(), 1, s, s], r)?,
        ))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let slice_dir = dir.join("slices");
        fs::create_dir_all(&slice_dir).map_err(|e| Error::io(&slice_dir, e))?;
        let s = self.size();
        let mut entries = Vec::with_capacity(self.slices.len());
        for sl in &self.slices {
            let ldct = format!("slices/{}_ldct.wnct", sl.id);
            let rdct = format!("slices/{}_rdct.wnct", sl.id);
            write_tensor(&dir.join(&ldct), &[s, s], &sl.ldct)?;
            write_tensor(&dir.join(&rdct), &[s, s], &sl.rdct)?;
            entries.push(SliceEntry {
                id: sl.id.clone(),
                phantom: sl.phantom,
                index: sl.index,
                split: sl.split,
                ldct,
                rdct,
            });
        }
        let mut phantom_splits = vec![Split::Test; self.config.phantoms];
        for sl in &self.slices {
            phantom_splits[sl.phantom] = sl.split;
        }
        let manifest = DatasetManifest {
            format_version: 1,
            config: self.config.clone(),
            normalization: self.normalization,
            phantom_splits,
            slices: entries,
        };
        write_json(&dir.join("manifest.json"), &manifest)
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let path = dir.join("manifest.json");
        if !path.exists() {
            return Err(Error::data(format!("no dataset manifest at {}", path.display())));
        }
        let m: DatasetManifest = read_json(&path)?;
        let s = m.config.size;
        let read = |rel: &str| -> Result<Vec<f32>> {
            let (dims, data) = read_tensor::<f32>(&dir.join(rel))?;
            if dims != [s, s] {
                return Err(Error::data(format!("{rel}: expected {s}x{s}, got {dims:?}")));
            }
            Ok(data)
        };
        let slices = m
            .slices
            .iter()
            .map(|e| {
                Ok(Slice {
                    id: e.id.clone(),
                    phantom: e.phantom,
                    index: e.index,
                    split: e.split,
                    ldct: read(&e.ldct)?,
                    rdct: read(&e.rdct)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ds = Dataset {
            config: m.config,
            normalization: m.normalization,
            slices,
        };
        ds.check_split_hygiene()?;
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_is_five_two_three() {
        assert_eq!(SplitConfig::default().counts(10).unwrap(), (5, 2, 3));
        let a = SplitConfig::default().assign(10, 1).unwrap();
        assert_eq!(a.iter().filter(|s| **s == Split::Train).count(), 5);
        assert_eq!(a.iter().filter(|s| **s == Split::Validation).count(), 2);
    }

    #[test]
    fn normalization_inverts() {
        let n = NormalizationConfig::new(-0.5, 3.0).unwrap();
        for v in [-0.5, 0.0, 1.7, 3.0] {
            assert!((n.invert(n.apply(v)) - v).abs() < 1e-12);
        }
        assert!(NormalizationConfig::new(1.0, 1.0).is_err());
    }
}
