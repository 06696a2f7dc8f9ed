// Phantom -> parallel-beam sinogram -> filtered back projection.

use ldct_wnet::ct_sim::{fbp, make_phantom, radon, PhantomSpec, RampWindow, SinogramGeometry};

pub fn run_example() -> ldct_wnet::Result<f64> {
    let size = 256;
    let truth = make_phantom(&PhantomSpec::shepp_logan(), size)?;
    let geom = SinogramGeometry::for_image(size, 1.0, 360)?.oversampled(2)?;
    let sino = radon(&truth, &geom)?;
    let recon = fbp(&sino, size, RampWindow::Ramlak)?;

    let mask = truth.inscribed_disk_mask();
    let (mut err, mut norm) = (0.0, 0.0);
    for ((r, t), m) in recon.values().iter().zip(truth.values()).zip(&mask) {
        if *m {
            err += (r - t).powi(2);
            norm += t * t;
        }
    }
    let nrmse = (err / norm).sqrt();
    println!(
        "{} angles x {} detector bins; FBP NRMSE inside the disk: {:.2}%",
        geom.n_angles,
        geom.n_detectors,
        100.0 * nrmse
    );
    Ok(nrmse)
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
