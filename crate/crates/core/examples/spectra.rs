// Orthonormal 2D FFT, DC centering and the two-channel packing fed to
// Fourier-domain networks.

use ldct_wnet::ct_sim::{make_phantom, PhantomSpec};
use ldct_wnet::spectral::{fft2, ifft2, pack, shift, unpack};

pub fn run_example() -> ldct_wnet::Result<f64> {
    let img = make_phantom(&PhantomSpec::shepp_logan(), 64)?;
    let spectrum = shift(&fft2(&img)?);
    let energy_image: f64 = img.values().iter().map(|v| v * v).sum();
    println!("Parseval: image {energy_image:.6}, spectrum {:.6}", spectrum.energy());

    let dc = spectrum.get(32, 32);
    println!("centered DC bin = {:.4} (= mean x 64)", dc.re);

    let channels = pack(&spectrum);
    let back = ifft2(&unpack(&channels)?, 1.0)?;
    let err = back
        .image
        .values()
        .iter()
        .zip(img.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("pack -> unpack -> ifft2 max error {err:.2e}, discarded imaginary {:.2e}", back.max_imag);
    Ok(err)
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
