// The 1D spectrum of a projection matches a radial line of the 2D spectrum.

use std::f64::consts::PI;

use ldct_wnet::ct_sim::{central_slice_check, make_phantom, PhantomSpec};

pub fn run_example() -> ldct_wnet::Result<f64> {
    let img = make_phantom(&PhantomSpec::modified_shepp_logan(), 128)?;
    let mut worst = 1.0f64;
    for k in 0..8 {
        let angle = k as f64 * PI / 8.0;
        let c = central_slice_check(&img, angle)?;
        println!("angle {:>5.1} deg: correlation {c:.5}", angle.to_degrees());
        worst = worst.min(c);
    }
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
