use rayon::prelude::*;

use super::dataset::{Dataset, Split};
use crate::error::Result;
use crate::models::Network;
use crate::objectives::{metrics, MetricRecord, MetricReport};

/// Name used for the unprocessed low-dose reconstruction rows.
pub const BASELINE: &str = "LDCT";

fn clamp01(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x).clamp(0.0, 1.0)).collect()
}

/// Metrics of `pred` against the routine-dose target, both clamped to `[0, 1]`.
pub fn score(method: &str, slice_id: &str, pred: &[f32], target: &[f32], size: usize) -> Result<MetricRecord> {
    let (p, t) = (clamp01(pred), clamp01(target));
    Ok(MetricRecord {
        method: method.to_string(),
        slice_id: slice_id.to_string(),
        ssim: metrics::ssim(&p, &t, size, 1.0)?,
        psnr_db: metrics::psnr(&p, &t, 1.0)?,
        nrmse_pct: metrics::nrmse(&p, &t)?,
    })
}

/// Rows comparing the LDCT input itself with the target.
pub fn baseline_report(data: &Dataset, split: Split) -> Result<MetricReport> {
    let rows = data
        .indices(split)
        .par_iter()
        .map(|&i| {
            let s = &data.slices[i];
            score(BASELINE, &s.id, &s.ldct, &s.rdct, data.size())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport { records: rows })
}

/// Enhances every slice of `split` (batches of `batch_size`) and scores it.
pub fn evaluate(network: &Network<f32>, method: &str, data: &Dataset, split: Split, batch_size: usize) -> Result<MetricReport> {
    let idx = data.indices(split);
    let size = data.size();
    let mut report = MetricReport::default();
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, _) = data.batch(chunk)?;
        let (out, _) = network.enhance(&x)?;
        for (b, &i) in chunk.iter().enumerate() {
            let s = &data.slices[i];
            report.push(score(method, &s.id, out.plane(b, 0), &s.rdct, size)?)?;
        }
    }
    Ok(report)
}
