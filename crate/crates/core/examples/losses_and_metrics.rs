// MS-SSIM + L1 training loss in both domains, and the evaluation metrics.

use ldct_wnet::models::Domain;
use ldct_wnet::nn::kernels::image_to_spectrum;
use ldct_wnet::nn::{Graph, Tensor4};
use ldct_wnet::objectives::{combine_terms, combined_loss, metrics, LossConfig};

pub fn run_example() -> ldct_wnet::Result<f64> {
    let cfg = LossConfig::default();
    // alpha * K * (1 - MS-SSIM) + (1 - alpha) * L1
    println!("image-domain loss for MS-SSIM 0.5, L1 0.1: {:.3}", combine_terms(0.5, 0.1, Domain::Image, &cfg));
    println!("Fourier-domain loss for the same terms:    {:.3}", combine_terms(0.5, 0.1, Domain::Fourier, &cfg));

    let n = 32;
    let clean: Vec<f32> = (0..n * n).map(|i| ((i % n) as f32 / n as f32).powi(2)).collect();
    let noisy: Vec<f32> = clean.iter().enumerate().map(|(i, v)| v + 0.05 * ((i * 13 % 7) as f32 - 3.0) / 3.0).collect();
    let (x, y) = (Tensor4::from_vec([1, 1, n, n], noisy.clone())?, Tensor4::from_vec([1, 1, n, n], clean.clone())?);

    let mut g = Graph::new();
    let (p, t) = (g.input(x.clone()), g.input(y.clone()));
    let img = combined_loss(&mut g, p, t, Domain::Image, &cfg)?;
    println!("image loss {:.5} (MS-SSIM term {:.5}, L1 {:.5})", g.scalar(img.total), g.scalar(img.ms_ssim), g.scalar(img.l1));

    let (ps, ts) = (g.input(image_to_spectrum(&x, true)), g.input(image_to_spectrum(&y, true)));
    let four = combined_loss(&mut g, ps, ts, Domain::Fourier, &cfg)?;
    println!("Fourier loss {:.3}", g.scalar(four.total));

    let as64 = |v: &[f32]| v.iter().map(|&a| f64::from(a)).collect::<Vec<_>>();
    let (a, b) = (as64(&noisy), as64(&clean));
    let ssim = metrics::ssim(&a, &b, n, 1.0)?;
    println!(
        "SSIM {ssim:.4}  PSNR {:.2} dB  NRMSE {:.2}%",
        metrics::psnr(&a, &b, 1.0)?,
        metrics::nrmse(&a, &b)?
    );
    Ok(ssim)
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
