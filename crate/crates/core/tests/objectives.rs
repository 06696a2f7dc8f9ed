use approx::assert_relative_eq;
use ldct_wnet::models::Domain;
use ldct_wnet::nn::gradcheck::{check_input_gradient, DEFAULT_STEP};
use ldct_wnet::nn::kernels::{gaussian_taps, image_to_spectrum};
use ldct_wnet::nn::{Graph, Tensor4};
use ldct_wnet::objectives::stats::{bonferroni, friedman, pair_count, posthoc_pairwise, wilcoxon_signed_rank};
use ldct_wnet::objectives::{combine_terms, combined_loss, l1_loss, metrics, ms_ssim, ms_ssim_plan, LossConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lcg(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = (1664525 * s + 1013904223) % (1 << 32);
            s as f64 / 4294967296.0
        })
        .collect()
}

fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// Correlated pair: `y = 0.7 x + 0.3 noise`.
fn pair(size: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let x = uniform(size * size, seed);
    let y = x.iter().zip(uniform(size * size, seed + 1)).map(|(a, b)| 0.7 * a + 0.3 * b).collect();
    (x, y)
}

/// Direct SSIM terms with an explicit 2D Gaussian window at every position.
fn direct_terms(x: &[f64], y: &[f64], n: usize, win: usize, r: f64) -> (f64, f64) {
    let t = gaussian_taps(win, 1.5);
    let (c1, c2) = ((0.01 * r).powi(2), (0.03 * r).powi(2));
    let o = n + 1 - win;
    let (mut s_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..o {
        for j in 0..o {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for a in 0..win {
                for b in 0..win {
                    let w = t[a] * t[b];
                    let (p, q) = (x[(i + a) * n + j + b], y[(i + a) * n + j + b]);
                    mx += w * p;
                    my += w * q;
                    xx += w * p * p;
                    yy += w * q * q;
                    xy += w * p * q;
                }
            }
            let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
            let cs = (2.0 * cov + c2) / (vx + vy + c2);
            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            s_sum += l * cs;
            cs_sum += cs;
        }
    }
    let m = (o * o) as f64;
    (s_sum / m, cs_sum / m)
}

fn halve(x: &[f64], n: usize) -> Vec<f64> {
    let h = n / 2;
    let mut out = vec![0.0; h * h];
    for i in 0..h {
        for j in 0..h {
            out[i * h + j] = (x[2 * i * n + 2 * j] + x[2 * i * n + 2 * j + 1] + x[(2 * i + 1) * n + 2 * j] + x[(2 * i + 1) * n + 2 * j + 1]) / 4.0;
        }
    }
    out
}

fn direct_ms_ssim(x: &[f64], y: &[f64], n: usize, r: f64) -> f64 {
    let cfg = LossConfig::default();
    let (weights, win) = ms_ssim_plan(n, &cfg);
    let (mut x, mut y, mut n) = (x.to_vec(), y.to_vec(), n);
    let mut out = 1.0;
    for (j, w) in weights.iter().enumerate() {
        let (s, cs) = direct_terms(&x, &y, n, win, r);
        let last = j + 1 == weights.len();
        out *= (if last { s } else { cs }).max(1e-8).powf(*w);
        x = halve(&x, n);
        y = halve(&y, n);
        n /= 2;
    }
    out
}

#[test]
fn ssim_matches_published_reference_values() {
    // reference: scikit-image structural_similarity with gaussian_weights,
    // sigma 1.5, population covariance, data_range 1
    for (size, seed, expected) in [
        (32usize, 1u64, 0.8906099468711149),
        (64, 2, 0.8859763277666455),
        (48, 3, 0.8932382823983804),
    ] {
        let x = lcg(seed, size * size);
        let y: Vec<f64> = x.iter().zip(lcg(seed + 100, size * size)).map(|(a, b)| 0.7 * a + 0.3 * b).collect();
        let v = metrics::ssim(&x, &y, size, 1.0).unwrap();
        assert!((v - expected).abs() < 1e-4, "size {size}: {v} vs {expected}");
    }
}

#[test]
fn ssim_and_ms_ssim_match_direct_window_oracle() {
    let cfg = LossConfig::default();
    for k in 0..20u64 {
        let size = [16, 24, 32, 48, 64][k as usize % 5];
        let (x, y) = pair(size, 100 + k);
        let s = metrics::ssim(&x, &y, size, 1.0).unwrap();
        let (win_s, _) = direct_terms(&x, &y, size, 11, 1.0);
        assert!((s - win_s).abs() < 1e-4);
        let m = metrics::ms_ssim(&x, &y, size, 1.0, &cfg).unwrap();
        assert!((m - direct_ms_ssim(&x, &y, size, 1.0)).abs() < 1e-4, "size {size}");
    }
}

fn tape_ms_ssim(x: &[f64], y: &[f64], size: usize, range: f64) -> f64 {
    let mut g = Graph::<f64>::new();
    let a = g.input(Tensor4::from_vec([1, 1, size, size], x.to_vec()).unwrap());
    let b = g.input(Tensor4::from_vec([1, 1, size, size], y.to_vec()).unwrap());
    let m = ms_ssim(&mut g, a, b, range, &LossConfig::default()).unwrap();
    g.scalar(m)
}

#[test]
fn differentiable_ms_ssim_matches_plain_metric() {
    for (k, size) in [16usize, 22, 44, 64, 88].into_iter().enumerate() {
        let (x, y) = pair(size, 200 + k as u64);
        let plain = metrics::ms_ssim(&x, &y, size, 1.0, &LossConfig::default()).unwrap();
        assert!((tape_ms_ssim(&x, &y, size, 1.0) - plain).abs() < 1e-10);
    }
}

#[test]
fn ms_ssim_self_and_inverted_binary() {
    let x: Vec<f64> = uniform(64 * 64, 5).iter().map(|v| if *v > 0.5 { 1.0 } else { 0.0 }).collect();
    let inv: Vec<f64> = x.iter().map(|v| 1.0 - v).collect();
    let cfg = LossConfig::default();
    assert!((metrics::ms_ssim(&x, &x, 64, 1.0, &cfg).unwrap() - 1.0).abs() < 1e-6);
    assert!(metrics::ms_ssim(&x, &inv, 64, 1.0, &cfg).unwrap() < 0.2);
}

#[test]
fn multichannel_scores_average_per_channel() {
    let size = 32;
    let (x0, y0) = pair(size, 7);
    let (x1, y1) = pair(size, 8);
    let mut g = Graph::<f64>::new();
    let a = g.input(Tensor4::from_vec([1, 2, size, size], [x0.clone(), x1.clone()].concat()).unwrap());
    let b = g.input(Tensor4::from_vec([1, 2, size, size], [y0.clone(), y1.clone()].concat()).unwrap());
    let m = ms_ssim(&mut g, a, b, 1.0, &LossConfig::default()).unwrap();
    let cfg = LossConfig::default();
    let expected = 0.5 * (metrics::ms_ssim(&x0, &y0, size, 1.0, &cfg).unwrap() + metrics::ms_ssim(&x1, &y1, size, 1.0, &cfg).unwrap());
    assert!((g.scalar(m) - expected).abs() < 1e-12);
}

#[test]
fn mismatched_shapes_rejected() {
    let mut g = Graph::<f64>::new();
    let a = g.input(Tensor4::zeros([1, 1, 16, 16]));
    let b = g.input(Tensor4::zeros([1, 1, 16, 8]));
    assert!(ms_ssim(&mut g, a, b, 1.0, &LossConfig::default()).is_err());
    assert!(l1_loss(&mut g, a, b).is_err());
}

#[test]
fn l1_matches_direct_sum() {
    let (x, y) = pair(16, 9);
    let mut g = Graph::<f64>::new();
    let a = g.input(Tensor4::from_vec([1, 1, 16, 16], x.clone()).unwrap());
    let b = g.input(Tensor4::from_vec([1, 1, 16, 16], y.clone()).unwrap());
    let l = l1_loss(&mut g, a, b).unwrap();
    let direct = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>() / 256.0;
    assert_relative_eq!(g.scalar(l), direct, max_relative = 1e-12);
    let c = g.input(Tensor4::from_vec([1, 1, 16, 16], y.iter().map(|v| v + 0.1).collect()).unwrap());
    let l = l1_loss(&mut g, c, b).unwrap();
    assert_relative_eq!(g.scalar(l), 0.1, max_relative = 1e-9);
}

#[test]
fn combined_loss_arithmetic() {
    let cfg = LossConfig::default();
    assert_relative_eq!(combine_terms(0.5, 0.1, Domain::Image, &cfg), 0.436, max_relative = 1e-9);
    assert_relative_eq!(combine_terms(0.5, 0.1, Domain::Fourier, &cfg), 840_000.016, max_relative = 1e-9);
}

#[test]
fn combined_loss_vanishes_on_identical_inputs_in_both_domains() {
    let (x, _) = pair(32, 10);
    let img = Tensor4::from_vec([1, 1, 32, 32], x).unwrap();
    let spec = image_to_spectrum(&img, true);
    for (t, domain) in [(img, Domain::Image), (spec, Domain::Fourier)] {
        let mut g = Graph::<f64>::new();
        let a = g.input(t.clone());
        let b = g.input(t);
        let terms = combined_loss(&mut g, a, b, domain, &LossConfig::default()).unwrap();
        assert!(g.scalar(terms.total).abs() < 1e-9 * LossConfig::default().k(domain));
    }
}

#[test]
fn combined_loss_gradients_in_both_domains() {
    for (size, seed) in [(12usize, 1u64), (24, 2)] {
        let (x, y) = pair(size, 300 + seed);
        let input = Tensor4::from_vec([2, 1, size, size], [x.clone(), y.clone()].concat()).unwrap();
        let target = Tensor4::from_vec([2, 1, size, size], [y, x].concat()).unwrap();
        let r = check_input_gradient(&input, |g, v| {
            let t = g.input(target.clone());
            Ok(combined_loss(g, v, t, Domain::Image, &LossConfig::default())?.total)
        }, DEFAULT_STEP, Some(80)).unwrap();
        assert!(r.relative_error < 1e-4, "image domain {size}: {r:?}");

        let st = image_to_spectrum(&target, true);
        let r = check_input_gradient(&input, |g, v| {
            let z = g.to_spectrum(v, true)?;
            let t = g.input(st.clone());
            Ok(combined_loss(g, z, t, Domain::Fourier, &LossConfig::default())?.total)
        }, DEFAULT_STEP, Some(80)).unwrap();
        assert!(r.relative_error < 1e-4, "fourier domain {size}: {r:?}");
    }
}

#[test]
fn psnr_and_nrmse_analytic_values() {
    let t = vec![0.5; 100];
    let p = vec![0.6; 100];
    assert_relative_eq!(metrics::psnr(&p, &t, 1.0).unwrap(), 20.0, max_relative = 1e-12);
    assert_relative_eq!(metrics::nrmse(&p, &t).unwrap(), 20.0, max_relative = 1e-12);
    let (x, _) = pair(16, 11);
    assert_eq!(metrics::ssim(&x, &x, 16, 1.0).unwrap(), 1.0);
    assert_eq!(metrics::psnr(&x, &x, 1.0).unwrap(), f64::INFINITY);
    assert_eq!(metrics::nrmse(&x, &x).unwrap(), 0.0);
}

#[test]
fn psnr_decreases_with_noise_amplitude() {
    let (x, _) = pair(32, 12);
    let noise = uniform(32 * 32, 13);
    let mut last = f64::INFINITY;
    for k in 1..=10 {
        let amp = 0.02 * k as f64;
        let p: Vec<f64> = x.iter().zip(&noise).map(|(a, n)| a + amp * (n - 0.5)).collect();
        let v = metrics::psnr(&p, &x, 1.0).unwrap();
        assert!(v < last);
        last = v;
    }
}

#[test]
fn friedman_consistent_ranking_fixture() {
    let scores: Vec<Vec<f64>> = (0..3).map(|m| (0..10).map(|s| 0.9 - 0.1 * m as f64 + 0.001 * s as f64).collect()).collect();
    let (chi, df, p) = friedman(&scores).unwrap();
    assert_relative_eq!(chi, 20.0, max_relative = 1e-12);
    assert_eq!(df, 2);
    assert!((p - 4.54e-5).abs() / 4.54e-5 < 0.05, "p = {p}");
    let flat = vec![vec![0.5; 10]; 3];
    assert_eq!(friedman(&flat).unwrap(), (0.0, 2, 1.0));
    let permuted = vec![scores[2].clone(), scores[0].clone(), scores[1].clone()];
    assert_relative_eq!(friedman(&permuted).unwrap().0, chi);
}

#[test]
fn wilcoxon_hand_computed_cases() {
    let a = uniform(30, 14);
    assert_eq!(wilcoxon_signed_rank(&a, &a).unwrap(), 1.0);
    // all 30 differences exactly +0.5: W+ = 465, tie-corrected variance 1801.875
    let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.125).collect();
    let b: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
    let p = wilcoxon_signed_rank(&b, &a).unwrap();
    let z: f64 = (465.0 - 232.5) / 1801.875f64.sqrt();
    let expected = statrs::function::erf::erfc(z / 2f64.sqrt());
    assert_relative_eq!(p, expected, max_relative = 1e-9);
    let names: Vec<String> = ["B", "A"].iter().map(|s| s.to_string()).collect();
    let table = posthoc_pairwise(&names, &[b, a]).unwrap();
    assert!(table[0].corrected_p < 1e-3 && table[0].significant);
    // exact small-sample case: 5 positive untied differences, p = 2/32
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [0.9, 1.8, 2.7, 3.6, 4.5];
    assert_relative_eq!(wilcoxon_signed_rank(&x, &y).unwrap(), 0.0625, max_relative = 1e-12);
}

#[test]
fn bonferroni_factor_is_pair_count() {
    assert_eq!(pair_count(7), 21);
    assert_eq!(bonferroni(0.001, 21), 0.001 * 21.0);
    assert_eq!(bonferroni(0.2, 21), 1.0);
    assert!(posthoc_pairwise(&["A".to_string()], &[vec![1.0]]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ms_ssim_is_symmetric(seed in 0u64..10_000, size in prop::sample::select(vec![16usize, 24, 32, 48])) {
        let (x, y) = pair(size, seed);
        let cfg = LossConfig::default();
        let ab = metrics::ms_ssim(&x, &y, size, 1.0, &cfg).unwrap();
        let ba = metrics::ms_ssim(&y, &x, size, 1.0, &cfg).unwrap();
        prop_assert!((ab - ba).abs() < 1e-6);
    }

    #[test]
    fn combined_loss_is_non_negative(seed in 0u64..10_000, fourier in any::<bool>()) {
        let (x, y) = pair(24, seed);
        let a = Tensor4::from_vec([1, 1, 24, 24], x).unwrap();
        let b = Tensor4::from_vec([1, 1, 24, 24], y).unwrap();
        let (a, b, d) = if fourier {
            (image_to_spectrum(&a, true), image_to_spectrum(&b, true), Domain::Fourier)
        } else {
            (a, b, Domain::Image)
        };
        let mut g = Graph::<f64>::new();
        let (pa, pb) = (g.input(a), g.input(b));
        let t = combined_loss(&mut g, pa, pb, d, &LossConfig::default()).unwrap();
        prop_assert!(g.scalar(t.total) > 0.0);
    }

    #[test]
    fn friedman_ignores_method_order(seed in 0u64..10_000) {
        let scores: Vec<Vec<f64>> = (0..4).map(|m| uniform(12, seed * 7 + m)).collect();
        let mut rev = scores.clone();
        rev.reverse();
        let (c1, _, p1) = friedman(&scores).unwrap();
        let (c2, _, p2) = friedman(&rev).unwrap();
        prop_assert!((c1 - c2).abs() < 1e-9 && (p1 - p2).abs() < 1e-12);
    }
}
