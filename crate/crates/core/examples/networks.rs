// The six single- and dual-domain networks: parameter counts and a forward
// pass through the Fourier bridges.

use ldct_wnet::models::{compose, Variant, WNetSpec};
use ldct_wnet::nn::Tensor4;

pub fn run_example() -> ldct_wnet::Result<Vec<(Variant, usize)>> {
    let mut counts = Vec::new();
    for v in Variant::ALL {
        let spec = WNetSpec::new(v, 4);
        println!("{:<9} {:>10} parameters, bridges {:?}", v.label(), spec.param_count(), spec.bridges());
        counts.push((v, spec.param_count()));
    }

    let net = compose::<f32>(&WNetSpec::new(Variant::FI, 2), 3)?;
    let x = Tensor4::full([1, 1, 32, 32], 0.25f32);
    let (y, imag) = net.enhance(&x)?;
    println!("FI forward: output {:?}, largest discarded imaginary part {imag:.2e}", y.shape());
    Ok(counts)
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
