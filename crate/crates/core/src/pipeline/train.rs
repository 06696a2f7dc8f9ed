use std::path::Path;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::augment::{augment, AugmentConfig};
use super::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::io::{config_hash, save_checkpoint, write_csv};
use crate::models::{compose, Domain, Network, StageOutputs, WNetSpec};
use crate::nn::kernels::image_to_spectrum;
use crate::nn::{Graph, NodeId, Tensor4};
use crate::objectives::{combined_loss, metrics, LossConfig};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub augment: AugmentConfig,
    pub seed: u64,
    /// Also keep a checkpoint every this many epochs (0: best only).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 4,
            adam: AdamConfig::default(),
            augment: AugmentConfig::default(),
            seed: 1,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: u64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_ssim: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation SSIM.
    pub network: Network<f32>,
    pub history: Vec<EpochRecord>,
    pub step_losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_ssim: f64,
    pub config_hash: String,
}

/// Loss target for each stage: the clean image, or its packed spectrum.
fn stage_targets(g: &mut Graph<f32>, stages: &StageOutputs, clean: &Tensor4<f32>, shifted: bool) -> Vec<NodeId> {
    let mut spectrum = None;
    stages
        .entries
        .iter()
        .map(|(d, _)| match d {
            Domain::Image => g.input(clean.clone()),
            Domain::Fourier => {
                let s = spectrum.get_or_insert_with(|| image_to_spectrum(clean, shifted));
                g.input(s.clone())
            }
        })
        .collect()
}

/// Records the forward pass and the unweighted sum of per-stage losses.
pub fn network_loss(
    g: &mut Graph<f32>,
    network: &Network<f32>,
    input: &Tensor4<f32>,
    clean: &Tensor4<f32>,
    loss: &LossConfig,
) -> Result<(NodeId, NodeId)> {
    let x = g.input(input.clone());
    let (out, stages) = network.forward(g, x)?;
    let targets = stage_targets(g, &stages, clean, network.spec.shifted);
    let mut total: Option<NodeId> = None;
    for ((domain, pred), target) in stages.entries.iter().zip(targets) {
        let terms = combined_loss(g, *pred, target, *domain, loss)?;
        total = Some(match total {
            None => terms.total,
            Some(t) => g.add(t, terms.total)?,
        });
    }
    Ok((total.expect("network has a stage"), out))
}

fn validate_epoch(network: &Network<f32>, data: &Dataset, idx: &[usize], cfg: &TrainConfig, loss: &LossConfig) -> Result<(f64, f64)> {
    if idx.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let size = data.size();
    let (mut loss_sum, mut ssim_sum) = (0.0, 0.0);
    for chunk in idx.chunks(cfg.batch_size) {
        let (x, y) = data.batch(chunk)?;
        let mut g = Graph::new();
        let (l, out) = network_loss(&mut g, network, &x, &y, loss)?;
        loss_sum += f64::from(g.scalar(l)) * chunk.len() as f64;
        let pred = g.value(out);
        for b in 0..chunk.len() {
            let p: Vec<f64> = pred.plane(b, 0).iter().map(|&v| f64::from(v).clamp(0.0, 1.0)).collect();
            let t: Vec<f64> = y.plane(b, 0).iter().map(|&v| f64::from(v).clamp(0.0, 1.0)).collect();
            ssim_sum += metrics::ssim(&p, &t, size, 1.0)?;
        }
    }
    let n = idx.len() as f64;
    Ok((loss_sum / n, ssim_sum / n))
}

/// Hash identifying a training run's full configuration.
pub fn run_hash(spec: &WNetSpec, data: &Dataset, cfg: &TrainConfig, loss: &LossConfig) -> String {
    config_hash(&(spec, &data.config, cfg, loss))
}

/// Trains a freshly composed network. When `out_dir` is given, writes
/// `history.csv` and the best checkpoint under `out_dir/best`.
pub fn train(spec: &WNetSpec, data: &Dataset, cfg: &TrainConfig, loss: &LossConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    loss.validate()?;
    let size = data.size();
    if size % spec.size_divisor() != 0 {
        return Err(Error::shape(format!(
            "slice size {size} is not divisible by {}",
            spec.size_divisor()
        )));
    }
    let train_idx = data.indices(Split::Train);
    if train_idx.is_empty() {
        return Err(Error::data("dataset has no training slices"));
    }
    let val_idx = data.indices(Split::Validation);
    let hash = run_hash(spec, data, cfg, loss);
    let model_seed = seeds::derive(cfg.seed, 10);
    let mut network: Network<f32> = compose(spec, model_seed)?;
    let mut adam = Adam::new(cfg.adam, &network.params);
    let mut best = (network.clone(), 0usize, f64::NEG_INFINITY);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step_losses = Vec::new();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut order = train_idx.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seeds::derive_path(cfg.seed, &[20, epoch as u64])));
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut xs = Vec::with_capacity(chunk.len() * size * size);
            let mut ys = Vec::with_capacity(chunk.len() * size * size);
            for (k, &i) in chunk.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive_path(
                    cfg.seed,
                    &[30, epoch as u64, b as u64, k as u64],
                ));
                let s = &data.slices[i];
                let (x, y) = augment(&s.ldct, &s.rdct, size, &cfg.augment, &mut rng);
                xs.extend(x);
                ys.extend(y);
            }
            let x = Tensor4::from_vec([chunk.len(), 1, size, size], xs)?;
            let y = Tensor4::from_vec([chunk.len(), 1, size, size], ys)?;
            let mut g = Graph::new();
            let (l, _) = network_loss(&mut g, &network, &x, &y, loss)?;
            let value = f64::from(g.scalar(l));
            if !value.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite training loss at epoch {epoch}, batch {b}"
                )));
            }
            g.backward(l)?;
            network.params.zero_grads();
            g.accumulate_param_grads(&mut network.params);
            drop(g);
            if !network.params.all_finite() {
                return Err(Error::numerical(format!(
                    "non-finite gradient at epoch {epoch}, batch {b}"
                )));
            }
            adam.step(&mut network.params)?;
            step_losses.push(value);
            epoch_loss += value * chunk.len() as f64;
        }
        let train_loss = epoch_loss / order.len() as f64;
        let (val_loss, val_ssim) = validate_epoch(&network, data, &val_idx, cfg, loss)?;
        info!(
            "{} epoch {epoch}: train {train_loss:.6} val {val_loss:.6} ssim {val_ssim:.4} ({:.1}s)",
            spec.variant,
            started.elapsed().as_secs_f64()
        );
        history.push(EpochRecord {
            epoch,
            steps: adam.steps(),
            train_loss,
            val_loss,
            val_ssim,
        });
        // with no validation split every epoch counts as an improvement
        if val_ssim > best.2 || val_ssim.is_nan() {
            best = (network.clone(), epoch, val_ssim);
        }
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                let extra = serde_json::json!({ "config_hash": hash, "val_ssim": val_ssim });
                save_checkpoint(&dir.join(format!("epoch_{epoch:03}")), &network, model_seed, epoch, extra)?;
            }
        }
    }

    let (network, best_epoch, best_val_ssim) = best;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_csv(&dir.join("history.csv"), &hash, &history)?;
        let extra = serde_json::json!({
            "config_hash": hash,
            "val_ssim": best_val_ssim,
            "train": cfg,
            "loss": loss,
            "normalization": data.normalization,
        });
        save_checkpoint(&dir.join("best"), &network, model_seed, best_epoch, extra)?;
    }
    Ok(TrainOutcome {
        network,
        history,
        step_losses,
        best_epoch,
        best_val_ssim,
        config_hash: hash,
    })
}
