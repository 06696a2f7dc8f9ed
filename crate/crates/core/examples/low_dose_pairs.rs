// Routine- and quarter-dose reconstructions of one synthetic abdomen slice.

use ldct_wnet::ct_sim::{make_pair, make_phantom, AbdomenGenerator, DoseModel, SinogramGeometry};
use ldct_wnet::objectives::metrics;

pub fn run_example() -> ldct_wnet::Result<(f64, f64)> {
    let size = 64;
    let spec = AbdomenGenerator::new(7).slice(0, 10, 20);
    let geom = SinogramGeometry::for_image(size, 1.0, 128)?;
    let dose = DoseModel { rng_seed: 42, ..DoseModel::default() };
    let pair = make_pair(&spec, &geom, &dose, size)?;
    let truth = make_phantom(&spec, size)?;

    let high = truth.min_max().1;
    let norm = |v: &[f64]| v.iter().map(|x| (x / high).clamp(0.0, 1.0)).collect::<Vec<_>>();
    let (ldct, rdct) = (norm(pair.ldct.values()), norm(pair.rdct.values()));
    let ssim = metrics::ssim(&ldct, &rdct, size, 1.0)?;
    let psnr = metrics::psnr(&ldct, &rdct, 1.0)?;
    println!("quarter dose vs routine dose: SSIM {ssim:.4}, PSNR {psnr:.2} dB");
    Ok((ssim, psnr))
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
