//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, NodeId};
use super::params::ParamStore;
use super::tensor::Tensor4;
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// `||analytic - numeric|| / max(||analytic||, ||numeric||)`.
    pub relative_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

impl GradCheckReport {
    fn from_pairs(analytic: &[f64], numeric: &[f64]) -> Self {
        let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let denom = na.max(nn).max(1e-300);
        let max_abs_error = analytic
            .iter()
            .zip(numeric)
            .map(|(a, n)| (a - n).abs())
            .fold(0.0, f64::max);
        GradCheckReport {
            relative_error: if na == 0.0 && nn == 0.0 { 0.0 } else { diff / denom },
            max_abs_error,
            checked: analytic.len(),
        }
    }
}

fn pick(n: usize, max_checks: Option<usize>, seed: u64) -> Vec<usize> {
    match max_checks {
        Some(m) if m < n => {
            let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, m).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    }
}

/// Checks d(scalar)/d(input) for a function built on a fresh graph from one
/// variable leaf. At most `max_checks` coordinates are probed.
pub fn check_input_gradient<F>(
    input: &Tensor4<f64>,
    build: F,
    step: f64,
    max_checks: Option<usize>,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, NodeId) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let x = g.variable(input.clone());
    let root = build(&mut g, x)?;
    g.backward(root)?;
    let analytic_full = g.grad(x).cloned().unwrap_or_else(|| Tensor4::zeros(input.shape()));

    let eval = |t: Tensor4<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.variable(t);
        let root = build(&mut g, x)?;
        Ok(g.scalar(root))
    };
    let coords = pick(input.numel(), max_checks, 17);
    let mut analytic = Vec::with_capacity(coords.len());
    let mut numeric = Vec::with_capacity(coords.len());
    for &i in &coords {
        let mut plus = input.clone();
        plus.data_mut()[i] += step;
        let mut minus = input.clone();
        minus.data_mut()[i] -= step;
        numeric.push((eval(plus)? - eval(minus)?) / (2.0 * step));
        analytic.push(analytic_full.data()[i]);
    }
    Ok(GradCheckReport::from_pairs(&analytic, &numeric))
}

/// Checks parameter gradients of a scalar built from a parameter store.
/// Probes up to `max_per_param` coordinates in every parameter tensor.
pub fn check_param_gradients<F>(
    store: &mut ParamStore<f64>,
    build: F,
    step: f64,
    max_per_param: Option<usize>,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &ParamStore<f64>) -> Result<NodeId>,
{
    store.zero_grads();
    let mut g = Graph::new();
    let root = build(&mut g, store)?;
    g.backward(root)?;
    g.accumulate_param_grads(store);

    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let root = build(&mut g, s)?;
        Ok(g.scalar(root))
    };
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let ids: Vec<_> = store.ids().collect();
    for (k, id) in ids.into_iter().enumerate() {
        let n = store.get(id).value.numel();
        for i in pick(n, max_per_param, 100 + k as u64) {
            let orig = store.get(id).value.data()[i];
            store.get_mut(id).value.data_mut()[i] = orig + step;
            let fp = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = orig - step;
            let fm = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = orig;
            numeric.push((fp - fm) / (2.0 * step));
            analytic.push(store.get(id).grad.data()[i]);
        }
    }
    Ok(GradCheckReport::from_pairs(&analytic, &numeric))
}
