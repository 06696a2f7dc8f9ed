use serde::{Deserialize, Serialize};

use super::stats::{analyze, StatResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub method: String,
    pub slice_id: String,
    pub ssim: f64,
    pub psnr_db: f64,
    pub nrmse_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample mean and (n - 1) standard deviation; infinite values are
    /// skipped.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub slices: usize,
    pub ssim: MeanStd,
    pub psnr_db: MeanStd,
    pub nrmse_pct: MeanStd,
}

/// Per-slice metrics for several methods on a shared set of slices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: Vec<MetricRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ssim,
    Psnr,
    Nrmse,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Ssim, Metric::Psnr, Metric::Nrmse];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ssim => "ssim",
            Metric::Psnr => "psnr_db",
            Metric::Nrmse => "nrmse_pct",
        }
    }

    fn get(self, r: &MetricRecord) -> f64 {
        match self {
            Metric::Ssim => r.ssim,
            Metric::Psnr => r.psnr_db,
            Metric::Nrmse => r.nrmse_pct,
        }
    }
}

impl MetricReport {
    pub fn push(&mut self, record: MetricRecord) -> Result<()> {
        if self
            .records
            .iter()
            .any(|r| r.method == record.method && r.slice_id == record.slice_id)
        {
            return Err(Error::data(format!(
                "duplicate record for {} / {}",
                record.method, record.slice_id
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn extend(&mut self, other: MetricReport) -> Result<()> {
        other.records.into_iter().try_for_each(|r| self.push(r))
    }

    /// Method names in first-seen order.
    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn summaries(&self) -> Vec<MethodSummary> {
        self.methods()
            .into_iter()
            .map(|m| {
                let rows: Vec<&MetricRecord> = self.records.iter().filter(|r| r.method == m).collect();
                MethodSummary {
                    slices: rows.len(),
                    ssim: MeanStd::of(rows.iter().map(|r| r.ssim)),
                    psnr_db: MeanStd::of(rows.iter().map(|r| r.psnr_db)),
                    nrmse_pct: MeanStd::of(rows.iter().map(|r| r.nrmse_pct)),
                    method: m,
                }
            })
            .collect()
    }

    pub fn summary(&self, method: &str) -> Option<MethodSummary> {
        self.summaries().into_iter().find(|s| s.method == method)
    }

    /// `scores[method][slice]` aligned on the first method's slice order.
    pub fn score_matrix(&self, metric: Metric) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let methods = self.methods();
        let slices: Vec<&str> = self
            .records
            .iter()
            .filter(|r| Some(&r.method) == methods.first())
            .map(|r| r.slice_id.as_str())
            .collect();
        let mut matrix = Vec::with_capacity(methods.len());
        for m in &methods {
            let row = slices
                .iter()
                .map(|s| {
                    self.records
                        .iter()
                        .find(|r| &r.method == m && r.slice_id == *s)
                        .map(|r| metric.get(r))
                        .ok_or_else(|| Error::data(format!("method {m} lacks slice {s}")))
                })
                .collect::<Result<Vec<_>>>()?;
            matrix.push(row);
        }
        Ok((methods, matrix))
    }

    pub fn statistics(&self, metric: Metric) -> Result<StatResult> {
        let (names, scores) = self.score_matrix(metric)?;
        analyze(&names, &scores)
    }

    pub fn summary_text(&self) -> String {
        let mut s = format!("{:<12} {:>6} {:>18} {:>18} {:>18}\n", "method", "slices", "SSIM", "PSNR (dB)", "NRMSE (%)");
        for m in self.summaries() {
            s += &format!(
                "{:<12} {:>6} {:>9.4} ± {:<6.4} {:>9.2} ± {:<6.2} {:>9.2} ± {:<6.2}\n",
                m.method, m.slices, m.ssim.mean, m.ssim.std, m.psnr_db.mean, m.psnr_db.std, m.nrmse_pct.mean, m.nrmse_pct.std
            );
        }
        s
    }
}
