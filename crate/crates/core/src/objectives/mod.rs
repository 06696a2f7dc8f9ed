//! Training loss (L1 plus MS-SSIM, weighted per domain), image-quality
//! metrics, and the non-parametric significance tests used to compare
//! methods.

mod loss;
pub mod metrics;
mod report;
pub mod stats;

pub use loss::{
    combine_terms, combined_loss, dynamic_range, l1_loss, ms_ssim, ms_ssim_plan, LossConfig, LossTerms,
    MS_SSIM_WEIGHTS,
};
pub use report::{MeanStd, Metric, MethodSummary, MetricRecord, MetricReport};
pub use stats::{PairwiseResult, StatResult};
