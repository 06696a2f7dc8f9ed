//! Command implementations behind the `ldct-wnet` binary. Every command
//! takes explicit paths and returns a `Result`; the binary only parses
//! arguments and maps errors to exit codes.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ct_sim::{central_slice_check, make_phantom, make_phantom_with, radon, PhantomSpec, RasterOptions, SinogramGeometry};
use crate::error::{Error, Result};
use crate::io::png::{tile_row, write_png16};
use crate::io::{config_hash, load_checkpoint, read_json, read_tensor, write_csv, write_json, write_tensor};
use crate::models::{compose, Domain, Network, Variant, WNetSpec};
use crate::nn::gradcheck::{check_input_gradient, DEFAULT_STEP};
use crate::nn::{Graph, Tensor4};
use crate::objectives::{combined_loss, LossConfig, Metric, MetricReport};
use crate::pipeline::{adam_update, baseline_report, build_dataset, evaluate, train, AdamConfig, Dataset, DatasetConfig, Split, TrainConfig};
use crate::spectral::{fft2, ifft2, pack, unpack};

/// Single-file run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub variant: Variant,
    pub depth: usize,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: Variant::FI,
            depth: 4,
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            loss: LossConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => read_json(p),
            None => Ok(RunConfig::default()),
        }
    }

    pub fn spec(&self) -> WNetSpec {
        WNetSpec::new(self.variant, self.depth)
    }
}

/// Builds and saves a dataset; returns its directory.
pub fn simulate(config: &RunConfig, no_noise: bool, out: &Path) -> Result<PathBuf> {
    let mut cfg = config.dataset.clone();
    cfg.dose.no_noise |= no_noise;
    let data = build_dataset(&cfg)?;
    data.save(out)?;
    Ok(out.to_path_buf())
}

fn dataset_for(config: &RunConfig, dataset: Option<&Path>) -> Result<Dataset> {
    match dataset {
        Some(dir) => Dataset::load(dir),
        None => build_dataset(&config.dataset),
    }
}

/// Trains `config.variant`; writes `history.csv` and `best/` under `out`.
pub fn train_command(config: &RunConfig, dataset: Option<&Path>, out: &Path) -> Result<PathBuf> {
    let data = dataset_for(config, dataset)?;
    train(&config.spec(), &data, &config.train, &config.loss, Some(out))?;
    Ok(out.join("best"))
}

#[derive(Debug, Clone, Serialize)]
struct StatsRow {
    metric: &'static str,
    test: &'static str,
    method_a: String,
    method_b: String,
    statistic: f64,
    df: usize,
    p_value: f64,
    corrected_p: f64,
    significant: bool,
}

/// Evaluates every checkpoint plus the LDCT baseline on the test split.
/// Writes `metrics.csv`, `stats.csv` and `summary.txt` under `out`.
pub fn eval_command(dataset: &Path, checkpoints: &[PathBuf], out: &Path) -> Result<MetricReport> {
    let data = Dataset::load(dataset)?;
    let mut report = baseline_report(&data, Split::Test)?;
    for dir in checkpoints {
        let (net, manifest) = load_checkpoint::<f32>(dir)?;
        report.extend(evaluate(&net, manifest.variant.name(), &data, Split::Test, 4)?)?;
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let hash = config_hash(&(&data.config, checkpoints));
    write_csv(&out.join("metrics.csv"), &hash, &report.records)?;
    let mut text = report.summary_text();
    if report.methods().len() >= 2 {
        let mut rows = Vec::new();
        for metric in Metric::ALL {
            let stats = report.statistics(metric)?;
            rows.push(StatsRow {
                metric: metric.name(),
                test: "friedman",
                method_a: String::new(),
                method_b: String::new(),
                statistic: stats.chi_square,
                df: stats.df,
                p_value: stats.p_value,
                corrected_p: stats.p_value,
                significant: stats.p_value < crate::objectives::stats::SIGNIFICANCE,
            });
            rows.extend(stats.pairwise.iter().map(|p| StatsRow {
                metric: metric.name(),
                test: "wilcoxon",
                method_a: p.method_a.clone(),
                method_b: p.method_b.clone(),
                statistic: f64::NAN,
                df: 0,
                p_value: p.raw_p,
                corrected_p: p.corrected_p,
                significant: p.significant,
            }));
            text += &stats.to_text(metric.name());
        }
        write_csv(&out.join("stats.csv"), &hash, &rows)?;
    }
    fs::write(out.join("summary.txt"), &text).map_err(|e| Error::io(out.join("summary.txt"), e))?;
    Ok(report)
}

fn read_plane(path: &Path) -> Result<(usize, Vec<f32>)> {
    let (dims, values) = read_tensor::<f32>(path)?;
    let size = match dims.as_slice() {
        [h, w] | [1, 1, h, w] if h == w => *h,
        _ => return Err(Error::shape(format!("{} is not a square image: dims {dims:?}", path.display()))),
    };
    Ok((size, values))
}

/// Enhances a normalized square image stored as a tensor container. The
/// output format follows the extension: `.png` or a container.
pub fn enhance_command(checkpoint: &Path, input: &Path, output: &Path) -> Result<()> {
    let (net, _) = load_checkpoint::<f32>(checkpoint)?;
    let (size, values) = read_plane(input)?;
    let (out, _) = net.enhance(&Tensor4::from_vec([1, 1, size, size], values)?)?;
    write_plane(output, size, out.data())
}

fn write_plane(path: &Path, size: usize, values: &[f32]) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        let v: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        write_png16(path, size, size, &v)
    } else {
        write_tensor(path, &[size, size], values)
    }
}

/// One PNG row: LDCT, each checkpoint's enhancement, RDCT.
pub fn montage_command(dataset: &Path, slice_id: &str, checkpoints: &[PathBuf], output: &Path) -> Result<()> {
    let data = Dataset::load(dataset)?;
    let slice = data
        .find(slice_id)
        .ok_or_else(|| Error::data(format!("slice {slice_id} not in dataset")))?;
    let size = data.size();
    let to64 = |v: &[f32]| v.iter().map(|&x| f64::from(x)).collect::<Vec<f64>>();
    let mut tiles = vec![to64(&slice.ldct)];
    let input = Tensor4::from_vec([1, 1, size, size], slice.ldct.clone())?;
    for dir in checkpoints {
        let (net, _): (Network<f32>, _) = load_checkpoint(dir)?;
        tiles.push(to64(net.enhance(&input)?.0.data()));
    }
    tiles.push(to64(&slice.rdct));
    let (w, h, pixels) = tile_row(&tiles, size, 2)?;
    write_png16(output, w, h, &pixels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamRow {
    pub variant: Variant,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub passed: bool,
}

/// Counts every variant by instantiating it, then checks the identities
/// between them.
pub fn paramcount(depth: usize) -> Result<(Vec<ParamRow>, Vec<IdentityCheck>)> {
    let mut rows = Vec::new();
    for v in Variant::ALL {
        let net: Network<f32> = compose(&WNetSpec::new(v, depth), 0)?;
        rows.push(ParamRow {
            variant: v,
            params: net.params.scalar_count(),
        });
    }
    let c = |v: Variant| rows.iter().find(|r| r.variant == v).map(|r| r.params).unwrap_or(0);
    let (i, f) = (c(Variant::I), c(Variant::F));
    let checks = vec![
        IdentityCheck { name: "F - I = 641", passed: f == i + 641 },
        IdentityCheck { name: "II = 2 I", passed: c(Variant::II) == 2 * i },
        IdentityCheck { name: "FF = 2 F", passed: c(Variant::FF) == 2 * f },
        IdentityCheck { name: "FI = I + F", passed: c(Variant::FI) == i + f },
        IdentityCheck { name: "IF = FI", passed: c(Variant::IF) == c(Variant::FI) },
    ];
    Ok((rows, checks))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

fn check(name: &'static str, value: f64, limit: f64, pass: impl Fn(f64, f64) -> bool) -> SelfCheck {
    SelfCheck {
        name,
        value,
        limit,
        passed: value.is_finite() && pass(value, limit),
    }
}

fn disk_chord_error() -> Result<f64> {
    let size = 128;
    let img = make_phantom_with(&PhantomSpec::disk(0.5, 1.0), size, &RasterOptions { supersample: 8, fov: 1.0 })?;
    let geom = SinogramGeometry::for_image(size, 1.0, 12)?;
    let sino = radon(&img, &geom)?;
    let (r, px) = (0.25, 1.0 / size as f64);
    let mut worst: f64 = 0.0;
    for a in 0..geom.n_angles {
        for (j, &p) in sino.row(a).iter().enumerate() {
            let s = geom.detector_offset(j);
            if (s.abs() - r).abs() < px {
                continue;
            }
            let chord = if s.abs() < r { 2.0 * (r * r - s * s).sqrt() } else { 0.0 };
            worst = worst.max((p - chord).abs() / (2.0 * r));
        }
    }
    Ok(worst)
}

fn fft_round_trip_error() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let img = crate::ct_sim::Image::from_vec(32, 1.0, (0..1024).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let spec = unpack(&pack(&fft2(&img)?))?;
    let back = ifft2(&spec, 1.0)?.image;
    Ok(back.values().iter().zip(img.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn loss_gradient_error() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 12;
    let x = Tensor4::from_vec([1, 1, n, n], (0..n * n).map(|_| rng.gen_range(0.1..0.9)).collect())?;
    let y = Tensor4::from_vec([1, 1, n, n], (0..n * n).map(|_| rng.gen_range(0.1..0.9)).collect())?;
    let cfg = LossConfig::default();
    let mut worst: f64 = 0.0;
    for domain in [Domain::Image, Domain::Fourier] {
        let report = check_input_gradient(
            &x,
            |g: &mut Graph<f64>, v| {
                let t = g.input(y.clone());
                let (p, t) = match domain {
                    Domain::Image => (v, t),
                    Domain::Fourier => (g.to_spectrum(v, true)?, g.to_spectrum(t, true)?),
                };
                Ok(combined_loss(g, p, t, domain, &cfg)?.total)
            },
            DEFAULT_STEP,
            Some(24),
        )?;
        worst = worst.max(report.relative_error);
    }
    Ok(worst)
}

fn adam_trajectory_error() -> Result<f64> {
    // w <- w - lr * mhat / (sqrt(vhat) + eps) on f = w^2 from w = 1, lr = 0.1
    let expected = [0.9000000005, 0.8004122286917928, 0.7015862729460303];
    let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
    let (mut w, mut m, mut v) = ([1.0f64], [0.0f64], [0.0f64]);
    let mut worst: f64 = 0.0;
    for (t, e) in expected.iter().enumerate() {
        let g = [2.0 * w[0]];
        adam_update(&mut w, &g, &mut m, &mut v, t as u64 + 1, &cfg)?;
        worst = worst.max((w[0] - e).abs());
    }
    Ok(worst)
}

fn central_slice_worst() -> Result<f64> {
    let img = make_phantom(&PhantomSpec::modified_shepp_logan(), 64)?;
    (0..8).try_fold(1.0f64, |acc, k| Ok(acc.min(central_slice_check(&img, k as f64 * PI / 8.0)?)))
}

/// Runs the analytic oracles; each entry reports the measured value
/// against its limit.
pub fn selftest() -> Result<Vec<SelfCheck>> {
    let below = |v: f64, l: f64| v < l;
    let (_, identities) = paramcount(2)?;
    Ok(vec![
        check("radon disk chord (fraction of peak)", disk_chord_error()?, 0.02, below),
        check("fft2 round trip (max abs)", fft_round_trip_error()?, 1e-10, below),
        check("loss gradient (relative)", loss_gradient_error()?, 1e-4, below),
        check("adam trajectory (max abs)", adam_trajectory_error()?, 1e-9, below),
        check("central slice (min correlation)", central_slice_worst()?, 0.99, |v, l| v >= l),
        check(
            "parameter identities (failures)",
            identities.iter().filter(|c| !c.passed).count() as f64,
            1.0,
            below,
        ),
    ])
}

/// Writes `config.json` describing a run next to its outputs.
pub fn record_config(config: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(&out.join("config.json"), config)
}
