use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Domain;
use crate::nn::kernels::gaussian_taps;
use crate::nn::{Graph, NodeId, Scalar};

/// Published MS-SSIM scale weights, finest scale first.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Contrast/structure terms are floored here before the fractional power.
const CS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha: f64,
    pub k_image: f64,
    pub k_fourier: f64,
    pub weights: Vec<f64>,
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.84,
            k_image: 1.0,
            k_fourier: 2e6,
            weights: MS_SSIM_WEIGHTS.to_vec(),
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.k_image > 0.0 && self.k_fourier > 0.0) {
            return Err(Error::invalid("loss scale factors must be positive"));
        }
        if self.weights.is_empty() || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-4 {
            return Err(Error::invalid("MS-SSIM weights must be non-empty and sum to 1"));
        }
        if self.window % 2 == 0 || self.window < 3 || self.sigma <= 0.0 {
            return Err(Error::invalid("window must be odd and >= 3 with positive sigma"));
        }
        Ok(())
    }

    pub fn k(&self, domain: Domain) -> f64 {
        match domain {
            Domain::Image => self.k_image,
            Domain::Fourier => self.k_fourier,
        }
    }
}

/// Scale count, renormalized weights and window size used for a `size x size`
/// input: as many scales as fit (the coarsest must still hold one window),
/// falling back to a single scale with a shrunken window for tiny inputs.
pub fn ms_ssim_plan(size: usize, cfg: &LossConfig) -> (Vec<f64>, usize) {
    let max = cfg.weights.len();
    let scales = (1..=max)
        .rev()
        .find(|&s| size >= cfg.window << (s - 1))
        .unwrap_or(1);
    let w = &cfg.weights[..scales];
    let total: f64 = w.iter().sum();
    let weights = w.iter().map(|v| v / total).collect();
    let window = if size >= cfg.window {
        cfg.window
    } else if size % 2 == 1 {
        size
    } else {
        size - 1
    };
    (weights, window)
}

/// `alpha * K * ms_ssim_loss + (1 - alpha) * l1` for precomputed terms.
pub fn combine_terms(ms_ssim_loss: f64, l1: f64, domain: Domain, cfg: &LossConfig) -> f64 {
    cfg.alpha * cfg.k(domain) * ms_ssim_loss + (1.0 - cfg.alpha) * l1
}

/// Mean absolute error over every element.
pub fn l1_loss<T: Scalar>(g: &mut Graph<T>, pred: NodeId, target: NodeId) -> Result<NodeId> {
    let d = g.sub(pred, target)?;
    let a = g.abs(d);
    Ok(g.mean_all(a))
}

fn check_pair<T: Scalar>(g: &Graph<T>, a: NodeId, b: NodeId) -> Result<[usize; 4]> {
    let (sa, sb) = (g.value(a).shape(), g.value(b).shape());
    if sa != sb {
        return Err(Error::shape(format!("prediction {sa:?} and target {sb:?} differ")));
    }
    if sa[2] != sa[3] {
        return Err(Error::shape(format!("MS-SSIM expects square planes, got {}x{}", sa[2], sa[3])));
    }
    Ok(sa)
}

/// Differentiable MS-SSIM with dynamic range `range`, scored per channel and
/// averaged. Returns a scalar node.
pub fn ms_ssim<T: Scalar>(
    g: &mut Graph<T>,
    pred: NodeId,
    target: NodeId,
    range: f64,
    cfg: &LossConfig,
) -> Result<NodeId> {
    let shape = check_pair(g, pred, target)?;
    let (weights, window) = ms_ssim_plan(shape[2], cfg);
    let taps: Vec<T> = gaussian_taps(window, cfg.sigma).into_iter().map(T::of).collect();
    let c1 = T::of((cfg.k1 * range).powi(2));
    let c2 = T::of((cfg.k2 * range).powi(2));
    let (mut x, mut y) = (pred, target);
    let mut product: Option<NodeId> = None;
    for (j, &w) in weights.iter().enumerate() {
        let last = j + 1 == weights.len();
        let mx = g.blur(x, &taps)?;
        let my = g.blur(y, &taps)?;
        let xx = g.mul(x, x)?;
        let yy = g.mul(y, y)?;
        let xy = g.mul(x, y)?;
        let bxx = g.blur(xx, &taps)?;
        let byy = g.blur(yy, &taps)?;
        let bxy = g.blur(xy, &taps)?;
        let mx2 = g.mul(mx, mx)?;
        let my2 = g.mul(my, my)?;
        let mxy = g.mul(mx, my)?;
        let vx = g.sub(bxx, mx2)?;
        let vy = g.sub(byy, my2)?;
        let cov = g.sub(bxy, mxy)?;
        let num = g.scale(cov, T::of(2.0));
        let num = g.add_scalar(num, c2);
        let den = g.add(vx, vy)?;
        let den = g.add_scalar(den, c2);
        let mut map = g.div(num, den)?;
        if last {
            let ln = g.scale(mxy, T::of(2.0));
            let ln = g.add_scalar(ln, c1);
            let ld = g.add(mx2, my2)?;
            let ld = g.add_scalar(ld, c1);
            let l = g.div(ln, ld)?;
            map = g.mul(l, map)?;
        }
        let term = g.spatial_mean(map);
        let term = g.clamp_min(term, T::of(CS_FLOOR));
        let term = g.pow(term, T::of(w));
        product = Some(match product {
            None => term,
            Some(p) => g.mul(p, term)?,
        });
        if !last {
            x = g.avgpool2(x)?;
            y = g.avgpool2(y)?;
        }
    }
    let product = product.expect("at least one scale");
    Ok(g.mean_all(product))
}

/// Dynamic range used for a domain: 1 for normalized images, the batch
/// target's value span for spectra.
pub fn dynamic_range<T: Scalar>(g: &Graph<T>, target: NodeId, domain: Domain) -> f64 {
    match domain {
        Domain::Image => 1.0,
        Domain::Fourier => {
            let (lo, hi) = g.value(target).min_max();
            let r = (hi - lo).as_f64();
            if r > 0.0 {
                r
            } else {
                1.0
            }
        }
    }
}

/// Scalar node and its two components.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: NodeId,
    pub ms_ssim: NodeId,
    pub l1: NodeId,
}

/// `alpha * K * (1 - MS-SSIM) + (1 - alpha) * L1` in the given domain.
pub fn combined_loss<T: Scalar>(
    g: &mut Graph<T>,
    pred: NodeId,
    target: NodeId,
    domain: Domain,
    cfg: &LossConfig,
) -> Result<LossTerms> {
    let range = dynamic_range(g, target, domain);
    let ms = ms_ssim(g, pred, target, range, cfg)?;
    let l1 = l1_loss(g, pred, target)?;
    let one_minus = g.scale(ms, -T::one());
    let one_minus = g.add_scalar(one_minus, T::one());
    let a = g.scale(one_minus, T::of(cfg.alpha * cfg.k(domain)));
    let b = g.scale(l1, T::of(1.0 - cfg.alpha));
    let total = g.add(a, b)?;
    Ok(LossTerms { total, ms_ssim: ms, l1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_terms_pins_constants() {
        let cfg = LossConfig::default();
        let img = combine_terms(0.5, 0.1, Domain::Image, &cfg);
        let fou = combine_terms(0.5, 0.1, Domain::Fourier, &cfg);
        assert!((img - 0.436).abs() / 0.436 < 1e-9);
        assert!((fou - 840_000.016).abs() / 840_000.016 < 1e-9);
    }

    #[test]
    fn plan_reduces_scales() {
        let cfg = LossConfig::default();
        let (w, win) = ms_ssim_plan(64, &cfg);
        assert_eq!((w.len(), win), (3, 11));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(ms_ssim_plan(176, &cfg).0.len(), 5);
        assert_eq!(ms_ssim_plan(8, &cfg), (vec![1.0], 7));
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        let bad = LossConfig { alpha: 1.0, ..LossConfig::default() };
        assert!(bad.validate().is_err());
    }
}
