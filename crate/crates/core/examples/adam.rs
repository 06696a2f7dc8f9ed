// Bias-corrected Adam on the scalar quadratic f(w) = w^2.

use ldct_wnet::pipeline::{adam_update, AdamConfig};

pub fn run_example() -> ldct_wnet::Result<f64> {
    let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
    let (mut w, mut m, mut v) = ([1.0f64], [0.0f64], [0.0f64]);
    for t in 1..=50 {
        let g = [2.0 * w[0]];
        adam_update(&mut w, &g, &mut m, &mut v, t, &cfg)?;
        if t <= 3 || t % 10 == 0 {
            println!("step {t:>2}: w = {:.10}", w[0]);
        }
    }
    Ok(w[0])
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
