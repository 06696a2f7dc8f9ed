// Small end-to-end run: simulate a dataset, train an I U-net briefly and
// score it against the low-dose input on the test split.

use ldct_wnet::models::{Variant, WNetSpec};
use ldct_wnet::objectives::LossConfig;
use ldct_wnet::pipeline::{baseline_report, build_dataset, evaluate, train, DatasetConfig, Split, TrainConfig, BASELINE};

pub fn run_example() -> ldct_wnet::Result<(f64, f64)> {
    let data = build_dataset(&DatasetConfig {
        size: 32,
        slices_per_phantom: 4,
        n_angles: 64,
        supersample: 2,
        ..DatasetConfig::default()
    })?;
    let outcome = train(
        &WNetSpec::new(Variant::I, 2),
        &data,
        &TrainConfig { epochs: 2, ..TrainConfig::default() },
        &LossConfig::default(),
        None,
    )?;
    for h in &outcome.history {
        println!("epoch {}: train {:.5}  val SSIM {:.4}", h.epoch, h.train_loss, h.val_ssim);
    }
    let mut report = baseline_report(&data, Split::Test)?;
    report.extend(evaluate(&outcome.network, "I", &data, Split::Test, 4)?)?;
    print!("{}", report.summary_text());
    let mean = |m: &str| report.summary(m).map(|s| s.ssim.mean).unwrap_or(f64::NAN);
    Ok((mean(BASELINE), mean("I")))
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
