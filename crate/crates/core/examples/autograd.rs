// Reverse-mode tape: build a small conv/relu/pool graph, backpropagate and
// compare against central finite differences.

use ldct_wnet::nn::gradcheck::{check_input_gradient, DEFAULT_STEP};
use ldct_wnet::nn::{Graph, Tensor4};

pub fn run_example() -> ldct_wnet::Result<f64> {
    let x = Tensor4::from_vec([1, 1, 6, 6], (0..36).map(|i| ((i * 7) % 11) as f64 / 11.0 - 0.4).collect())?;
    let w = Tensor4::from_vec([2, 1, 3, 3], (0..18).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let b = Tensor4::from_vec([2, 1, 1, 1], vec![0.1, -0.05])?;

    let report = check_input_gradient(
        &x,
        |g: &mut Graph<f64>, v| {
            let (wi, bi) = (g.input(w.clone()), g.input(b.clone()));
            let y = g.conv2d(v, wi, bi)?;
            let y = g.relu(y);
            let y = g.maxpool2(y)?;
            let sq = g.mul(y, y)?;
            Ok(g.sum_all(sq))
        },
        DEFAULT_STEP,
        None,
    )?;
    println!(
        "{} input coordinates checked, relative error {:.2e}",
        report.checked, report.relative_error
    );
    Ok(report.relative_error)
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
