// Friedman omnibus test with Bonferroni-corrected Wilcoxon pairs.

use ldct_wnet::objectives::stats::analyze;

pub fn run_example() -> ldct_wnet::Result<f64> {
    let names: Vec<String> = ["LDCT", "I U-net", "FI W-net"].iter().map(|s| s.to_string()).collect();
    let scores: Vec<Vec<f64>> = (0..3)
        .map(|m| (0..10).map(|s| 0.88 + 0.03 * m as f64 + 0.002 * ((s * 7 + m * 3) % 5) as f64).collect())
        .collect();
    let result = analyze(&names, &scores)?;
    print!("{}", result.to_text("ssim"));
    Ok(result.p_value)
}

#[allow(dead_code)]
fn main() -> ldct_wnet::Result<()> {
    run_example().map(|_| ())
}
