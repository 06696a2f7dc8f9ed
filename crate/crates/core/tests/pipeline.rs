use std::collections::HashSet;

use ldct_wnet::models::{compose, Variant, WNetSpec};
use ldct_wnet::nn::{Graph, ParamStore, Tensor4};
use ldct_wnet::objectives::{metrics, LossConfig};
use ldct_wnet::pipeline::{
    adam_update, augment, baseline_report, build_dataset, evaluate, network_loss, train, Adam, AdamConfig,
    AugmentConfig, Dataset, DatasetConfig, NormalizationConfig, Split, TrainConfig, Transform, BASELINE,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config() -> DatasetConfig {
    DatasetConfig {
        size: 32,
        phantoms: 10,
        slices_per_phantom: 2,
        n_angles: 48,
        supersample: 2,
        ..DatasetConfig::default()
    }
}

fn small_dataset() -> Dataset {
    build_dataset(&small_config()).unwrap()
}

fn lcg_plane(seed: u64, n: usize) -> Vec<f32> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n * n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 40) as f32 / (1u64 << 24) as f32
        })
        .collect()
}

#[test]
fn splits_partition_phantoms_five_two_three() {
    let data = small_dataset();
    data.check_split_hygiene().unwrap();
    let phantoms = |split| data.indices(split).iter().map(|&i| data.slices[i].phantom).collect::<HashSet<_>>();
    let (tr, va, te) = (phantoms(Split::Train), phantoms(Split::Validation), phantoms(Split::Test));
    assert_eq!((tr.len(), va.len(), te.len()), (5, 2, 3));
    assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
    assert_eq!(data.slices.len(), 20);
}

#[test]
fn split_assignment_depends_on_the_seed_only() {
    let cfg = small_config().split;
    assert_eq!(cfg.assign(10, 7).unwrap(), cfg.assign(10, 7).unwrap());
    let differs = (0..20).any(|s| cfg.assign(10, s).unwrap() != cfg.assign(10, 7).unwrap());
    assert!(differs);
}

#[test]
fn dataset_is_normalized_and_reproducible() {
    let a = small_dataset();
    let b = small_dataset();
    assert_eq!(a, b);
    let max_truth = a.slices.iter().flat_map(|s| s.rdct.iter()).cloned().fold(f32::MIN, f32::max);
    assert!(max_truth > 0.5 && max_truth < 1.5, "{max_truth}");
}

#[test]
fn dataset_save_load_round_trip() {
    let data = small_dataset();
    let dir = tempfile::tempdir().unwrap();
    data.save(dir.path()).unwrap();
    let back = Dataset::load(dir.path()).unwrap();
    assert_eq!(back, data);
}

#[test]
fn normalization_inverts() {
    let n = NormalizationConfig::new(-0.2, 3.7).unwrap();
    for v in [-0.2, 0.0, 1.234, 3.7, 5.0] {
        assert!((n.invert(n.apply(v)) - v).abs() < 1e-6);
    }
    assert!(n.apply(1.0) < n.apply(1.1));
    assert!(NormalizationConfig::new(1.0, 1.0).is_err());
}

#[test]
fn augmenting_an_identical_pair_keeps_it_identical() {
    let x = lcg_plane(3, 32);
    let cfg = AugmentConfig::default();
    for seed in 0..20 {
        let (a, b) = augment(&x, &x, 32, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(a, b);
    }
}

#[test]
fn disabled_or_trivial_augmentation_is_the_identity() {
    let x = lcg_plane(5, 16);
    let off = AugmentConfig { enabled: false, ..AugmentConfig::default() };
    let (a, _) = augment(&x, &x, 16, &off, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(a, x);
    assert_eq!(Transform::identity().apply(&x, 16), x);
}

#[test]
fn flips_preserve_ssim_exactly() {
    let x = lcg_plane(1, 32);
    let y: Vec<f32> = lcg_plane(2, 32).iter().zip(&x).map(|(n, v)| 0.8 * v + 0.2 * n).collect();
    let as64 = |v: &[f32]| v.iter().map(|&a| f64::from(a)).collect::<Vec<_>>();
    let base = metrics::ssim(&as64(&x), &as64(&y), 32, 1.0).unwrap();
    for (h, v) in [(true, false), (false, true), (true, true)] {
        let t = Transform { flip_horizontal: h, flip_vertical: v, ..Transform::identity() };
        let (fx, fy) = (t.apply(&x, 32), t.apply(&y, 32));
        let s = metrics::ssim(&as64(&fx), &as64(&fy), 32, 1.0).unwrap();
        assert!((s - base).abs() < 1e-12, "{s} vs {base}");
        assert_eq!(t.apply(&fx, 32), x);
    }
}

fn quadratic_adam(steps: u64, lr: f64) -> Vec<(f64, f64, f64)> {
    let cfg = AdamConfig { lr, ..AdamConfig::default() };
    let (mut w, mut m, mut v) = ([1.0f64], [0.0f64], [0.0f64]);
    (1..=steps)
        .map(|t| {
            let g = [2.0 * w[0]];
            adam_update(&mut w, &g, &mut m, &mut v, t, &cfg).unwrap();
            (w[0], m[0], v[0])
        })
        .collect()
}

#[test]
fn adam_matches_the_scalar_trajectory() {
    // independent double-precision evaluation of the bias-corrected update
    let expected = [
        (0.9000000005, 0.19999999999999996, 0.0040000000000000036),
        (0.8004122286917928, 0.3600000000999999, 0.007236000003600007),
        (0.7015862729460303, 0.48408244582835847, 0.00979140294695386),
    ];
    for (got, want) in quadratic_adam(3, 0.1).iter().zip(expected) {
        assert!((got.0 - want.0).abs() < 1e-9, "w {got:?} vs {want:?}");
        assert!((got.1 - want.1).abs() < 1e-9);
        assert!((got.2 - want.2).abs() < 1e-9);
    }
}

#[test]
fn adam_descends_the_quadratic() {
    let traj = quadratic_adam(50, 0.1);
    assert!(traj.last().unwrap().0.abs() < 0.5);
}

#[test]
fn adam_ignores_zero_gradients_and_rejects_step_zero() {
    let cfg = AdamConfig::default();
    let (mut w, mut m, mut v) = ([0.3f64], [0.5f64], [0.25f64]);
    adam_update(&mut w, &[0.0], &mut m, &mut v, 1, &cfg).unwrap();
    assert!(m[0] < 0.5 && v[0] < 0.25);
    let (mut w2, mut m2, mut v2) = ([0.3f64], [0.0f64], [0.0f64]);
    adam_update(&mut w2, &[0.0], &mut m2, &mut v2, 1, &cfg).unwrap();
    assert_eq!(w2[0], 0.3);
    assert!(adam_update(&mut w, &[1.0], &mut m, &mut v, 0, &cfg).is_err());
}

#[test]
fn adam_over_a_store_matches_the_scalar_rule() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("w", Tensor4::from_vec([1, 1, 1, 1], vec![1.0]).unwrap());
    let mut adam = Adam::new(AdamConfig { lr: 0.1, ..AdamConfig::default() }, &store);
    let traj = quadratic_adam(3, 0.1);
    for want in traj {
        let w = store.get(id).value.data()[0];
        store.get_mut(id).grad.data_mut()[0] = 2.0 * w;
        adam.step(&mut store).unwrap();
        assert_eq!(store.get(id).value.data()[0], want.0);
    }
    assert_eq!(adam.steps(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn adam_first_step_moves_by_the_learning_rate(g in prop_oneof![-10.0f64..-1e-3, 1e-3f64..10.0], lr in 1e-4f64..1.0) {
        let cfg = AdamConfig { lr, ..AdamConfig::default() };
        let (mut w, mut m, mut v) = ([0.0f64], [0.0f64], [0.0f64]);
        adam_update(&mut w, &[g], &mut m, &mut v, 1, &cfg).unwrap();
        prop_assert!((w[0] + lr * g.signum()).abs() < 1e-6 * lr);
    }
}

#[test]
fn overfit_smoke_test() {
    let data = small_dataset();
    let idx: Vec<usize> = data.indices(Split::Train).into_iter().take(4).collect();
    let (x, y) = data.batch(&idx).unwrap();
    let spec = WNetSpec::new(Variant::I, 2);
    let mut net = compose::<f32>(&spec, 1).unwrap();
    let mut adam = Adam::new(AdamConfig::default(), &net.params);
    let loss = LossConfig::default();
    let mut losses = Vec::new();
    for _ in 0..200 {
        let mut g = Graph::new();
        let (l, _) = network_loss(&mut g, &net, &x, &y, &loss).unwrap();
        losses.push(f64::from(g.scalar(l)));
        g.backward(l).unwrap();
        net.params.zero_grads();
        g.accumulate_param_grads(&mut net.params);
        adam.step(&mut net.params).unwrap();
    }
    let first = losses[0];
    let last = *losses.last().unwrap();
    assert!(last < 0.1 * first, "loss {first} -> {last}");
    let windows: Vec<f64> = losses.chunks(20).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    for pair in windows.windows(2) {
        assert!(pair[1] <= pair[0], "smoothed loss rose: {windows:?}");
    }
}

#[test]
fn evaluation_has_one_row_per_method_and_slice() {
    let data = small_dataset();
    let n_test = data.indices(Split::Test).len();
    let base = baseline_report(&data, Split::Test).unwrap();
    assert_eq!(base.records.len(), n_test);
    let net = compose::<f32>(&WNetSpec::new(Variant::I, 2), 3).unwrap();
    let mut report = evaluate(&net, "I", &data, Split::Test, 3).unwrap();
    assert_eq!(report.records.len(), n_test);
    report.extend(base).unwrap();
    assert_eq!(report.records.len(), 2 * n_test);
    assert_eq!(report.methods().len(), 2);
}

#[test]
fn baseline_on_identity_data_scores_one() {
    let mut data = small_dataset();
    for s in &mut data.slices {
        s.ldct = s.rdct.clone();
    }
    let base = baseline_report(&data, Split::Test).unwrap();
    assert!(base.records.iter().all(|r| (r.ssim - 1.0).abs() < 1e-12 && r.method == BASELINE));
}

#[test]
fn training_validates_its_config() {
    let data = small_dataset();
    let spec = WNetSpec::new(Variant::I, 2);
    let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
    assert!(train(&spec, &data, &cfg, &LossConfig::default(), None).is_err());
    let cfg = TrainConfig { batch_size: 0, ..TrainConfig::default() };
    assert!(train(&spec, &data, &cfg, &LossConfig::default(), None).is_err());
}

#[test]
fn training_is_reproducible_and_writes_artifacts() {
    let data = small_dataset();
    let spec = WNetSpec::new(Variant::I, 2);
    let cfg = TrainConfig { epochs: 2, ..TrainConfig::default() };
    let dir = tempfile::tempdir().unwrap();
    let a = train(&spec, &data, &cfg, &LossConfig::default(), Some(dir.path())).unwrap();
    let b = train(&spec, &data, &cfg, &LossConfig::default(), None).unwrap();
    assert_eq!(a.step_losses, b.step_losses);
    assert_eq!(a.history, b.history);
    assert_eq!(a.history.len(), 2);
    assert!(dir.path().join("history.csv").exists());
    assert!(dir.path().join("best").join("manifest.json").exists());
}
