//! Dataset assembly, augmentation, optimization and evaluation.

mod adam;
mod augment;
mod dataset;
mod evaluate;
mod train;

pub use adam::{adam_update, Adam, AdamConfig};
pub use augment::{augment, AugmentConfig, Transform};
pub use dataset::{
    build_dataset, Dataset, DatasetConfig, DatasetManifest, NormalizationConfig, Slice, SliceEntry, Split,
    SplitConfig,
};
pub use evaluate::{baseline_report, evaluate, score, BASELINE};
pub use train::{network_loss, run_hash, train, EpochRecord, TrainConfig, TrainOutcome};
