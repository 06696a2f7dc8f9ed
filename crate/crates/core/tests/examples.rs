macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }
    };
}

example!(adam);
example!(autograd);
example!(central_slice);
example!(checkpoints);
example!(losses_and_metrics);
example!(low_dose_pairs);
example!(networks);
example!(simulate_ct);
example!(spectra);
example!(statistics);
example!(train_and_evaluate);

#[test]
fn adam_example_descends() {
    assert!(adam::run_example().unwrap().abs() < 0.5);
}

#[test]
fn autograd_example_matches_finite_differences() {
    assert!(autograd::run_example().unwrap() < 1e-6);
}

#[test]
fn central_slice_example_correlates() {
    assert!(central_slice::run_example().unwrap() >= 0.99);
}

#[test]
fn checkpoint_example_round_trips() {
    assert!(checkpoints::run_example().unwrap());
}

#[test]
fn loss_example_runs() {
    let s = losses_and_metrics::run_example().unwrap();
    assert!(s > 0.0 && s < 1.0);
}

#[test]
fn low_dose_example_is_noisy_but_similar() {
    let (ssim, psnr) = low_dose_pairs::run_example().unwrap();
    assert!(ssim > 0.5 && ssim < 0.99, "{ssim}");
    assert!(psnr > 15.0, "{psnr}");
}

#[test]
fn networks_example_counts() {
    let counts = networks::run_example().unwrap();
    assert_eq!(counts.len(), 6);
}

#[test]
fn simulate_example_reconstructs() {
    assert!(simulate_ct::run_example().unwrap() < 0.05);
}

#[test]
fn spectra_example_round_trips() {
    assert!(spectra::run_example().unwrap() < 1e-10);
}

#[test]
fn statistics_example_is_significant() {
    assert!(statistics::run_example().unwrap() < 0.05);
}

#[test]
fn training_example_improves_on_low_dose() {
    let (base, net) = train_and_evaluate::run_example().unwrap();
    assert!(net.is_finite() && base.is_finite());
}
