//! Friedman omnibus test and Bonferroni-corrected Wilcoxon signed-rank
//! pairwise comparisons on paired per-slice scores.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseResult {
    pub method_a: String,
    pub method_b: String,
    pub raw_p: f64,
    pub corrected_p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatResult {
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    pub pairwise: Vec<PairwiseResult>,
}

pub const SIGNIFICANCE: f64 = 0.05;

/// Average (1-based) ranks, ascending, plus tie group sizes.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

/// Friedman chi-square for `scores[method][slice]`, tie-corrected.
/// Returns `(chi_square, df, p)`.
pub fn friedman(scores: &[Vec<f64>]) -> Result<(f64, usize, f64)> {
    let k = scores.len();
    if k < 2 {
        return Err(Error::invalid("Friedman test needs at least two methods"));
    }
    let n = scores[0].len();
    if n == 0 || scores.iter().any(|s| s.len() != n) {
        return Err(Error::shape("every method needs the same non-zero number of slices"));
    }
    let mut rank_sums = vec![0.0; k];
    let mut ties_total = 0.0;
    for i in 0..n {
        let row: Vec<f64> = scores.iter().map(|s| s[i]).collect();
        let (ranks, ties) = average_ranks(&row);
        for (sum, r) in rank_sums.iter_mut().zip(&ranks) {
            *sum += r;
        }
        ties_total += tie_term(&ties);
    }
    let (nf, kf) = (n as f64, k as f64);
    let df = k - 1;
    let denom = 1.0 - ties_total / (nf * (kf * kf * kf - kf));
    if denom <= 1e-12 {
        return Ok((0.0, df, 1.0));
    }
    let ss: f64 = rank_sums.iter().map(|r| r * r).sum();
    let chi = (12.0 / (nf * kf * (kf + 1.0)) * ss - 3.0 * nf * (kf + 1.0)) / denom;
    let chi = chi.max(0.0);
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::numerical(e.to_string()))?;
    Ok((chi, df, dist.sf(chi)))
}

/// Exact two-sided p-value for the signed-rank statistic `w_plus` with `n`
/// untied non-zero differences.
fn exact_signed_rank_p(w_plus: f64, n: usize) -> f64 {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    for r in 1..=n {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(n as i32);
    let w = w_plus.round() as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Two-sided Wilcoxon signed-rank p-value for paired samples.
///
/// Zero differences are dropped. Exact below 20 untied pairs, otherwise the
/// tie-corrected normal approximation.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("paired samples differ in length"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(1.0);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    if n < 20 && ties.is_empty() {
        return Ok(exact_signed_rank_p(w_plus, n));
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = (w_plus - mean) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok((2.0 * normal.sf(z.abs())).min(1.0))
}

pub fn pair_count(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// `min(1, p * pairs)`.
pub fn bonferroni(p: f64, pairs: usize) -> f64 {
    (p * pairs as f64).min(1.0)
}

/// Wilcoxon test on every method pair with Bonferroni correction.
pub fn posthoc_pairwise(names: &[String], scores: &[Vec<f64>]) -> Result<Vec<PairwiseResult>> {
    if names.len() != scores.len() {
        return Err(Error::shape("one name per method required"));
    }
    let pairs = pair_count(names.len());
    if pairs == 0 {
        return Err(Error::invalid("pairwise comparison needs at least two methods"));
    }
    let mut out = Vec::with_capacity(pairs);
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let raw_p = wilcoxon_signed_rank(&scores[i], &scores[j])?;
            let corrected_p = bonferroni(raw_p, pairs);
            out.push(PairwiseResult {
                method_a: names[i].clone(),
                method_b: names[j].clone(),
                raw_p,
                corrected_p,
                significant: corrected_p < SIGNIFICANCE,
            });
        }
    }
    Ok(out)
}

/// Friedman omnibus plus corrected pairwise table.
pub fn analyze(names: &[String], scores: &[Vec<f64>]) -> Result<StatResult> {
    let (chi_square, df, p_value) = friedman(scores)?;
    let pairwise = posthoc_pairwise(names, scores)?;
    Ok(StatResult {
        chi_square,
        df,
        p_value,
        pairwise,
    })
}

impl StatResult {
    pub fn to_text(&self, metric: &str) -> String {
        let mut s = format!(
            "{metric}: Friedman chi2 = {:.4}, df = {}, p = {:.3e}\n",
            self.chi_square, self.df, self.p_value
        );
        for p in &self.pairwise {
            s += &format!(
                "  {} vs {}: p = {:.3e}, corrected p = {:.3e}{}\n",
                p.method_a,
                p.method_b,
                p.raw_p,
                p.corrected_p,
                if p.significant { " *" } else { "" }
            );
        }
        s
    }
}
