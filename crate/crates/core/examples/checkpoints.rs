// Tensor containers and network checkpoints on disk.

use ldct_wnet::io::{load_checkpoint, read_tensor, save_checkpoint, write_tensor};
use ldct_wnet::models::{compose, Variant, WNetSpec};
use ldct_wnet::nn::Tensor4;

pub fn run_example() -> ldct_wnet::Result<bool> {
    let dir = std::env::temp_dir().join(format!("ldct-wnet-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| ldct_wnet::Error::io(&dir, e))?;
    let values: Vec<f64> = (0..12).map(|i| i as f64 / 3.0).collect();
    write_tensor(&dir.join("plane.wnct"), &[3, 4], &values)?;
    let (dims, back) = read_tensor::<f64>(&dir.join("plane.wnct"))?;
    println!("container dims {dims:?}, lossless: {}", back == values);

    let net = compose::<f32>(&WNetSpec::new(Variant::IF, 2), 11)?;
    save_checkpoint(&dir.join("if"), &net, 11, 0, serde_json::json!({ "note": "untrained" }))?;
    let (restored, manifest) = load_checkpoint::<f32>(&dir.join("if"))?;
    let x = Tensor4::full([1, 1, 16, 16], 0.3f32);
    let same = net.enhance(&x)?.0 == restored.enhance(&x)?.0;
    println!("{} with {} parameters restored; identical output: {same}", manifest.variant.label(), manifest.param_count);
    let _ = std::fs::remove_dir_all(&dir);
    Ok(same && back == values)
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
