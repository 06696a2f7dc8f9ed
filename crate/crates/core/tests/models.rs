use ldct_wnet::models::{build_unet, compose, param_count, Bridge, UNetConfig, Variant, WNetSpec};
use ldct_wnet::nn::gradcheck::{check_input_gradient, check_param_gradients, DEFAULT_STEP};
use ldct_wnet::nn::{Graph, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn count(v: Variant, depth: usize) -> usize {
    WNetSpec::new(v, depth).param_count()
}

#[test]
fn parameter_identities_hold_at_every_depth() {
    for depth in 1..=5 {
        let (i, f) = (count(Variant::I, depth), count(Variant::F, depth));
        assert_eq!(f - i, 641);
        assert_eq!(count(Variant::II, depth), 2 * i);
        assert_eq!(count(Variant::FF, depth), 2 * f);
        assert_eq!(count(Variant::FI, depth), i + f);
        assert_eq!(count(Variant::IF, depth), i + f);
    }
}

#[test]
fn runtime_enumeration_matches_closed_form() {
    for v in Variant::ALL {
        let spec = WNetSpec::new(v, 2);
        let net = compose::<f32>(&spec, 3).unwrap();
        assert_eq!(param_count(&net), spec.param_count());
    }
    let (_, store) = build_unet::<f32, _>(UNetConfig::image(1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(store.scalar_count(), 37_633);
}

#[test]
fn composition_is_deterministic_per_seed() {
    let spec = WNetSpec::new(Variant::FI, 2);
    let a = compose::<f32>(&spec, 9).unwrap();
    let b = compose::<f32>(&spec, 9).unwrap();
    let c = compose::<f32>(&spec, 10).unwrap();
    let values = |n: &ldct_wnet::models::Network<f32>| n.params.iter().flat_map(|p| p.value.data().to_vec()).collect::<Vec<_>>();
    assert_eq!(values(&a), values(&b));
    assert_ne!(values(&a), values(&c));
}

#[test]
fn fi_wiring_goes_through_the_fourier_bridge() {
    let spec = WNetSpec::new(Variant::FI, 1);
    assert_eq!(spec.bridges(), vec![Bridge::ToFourier, Bridge::ToImage, Bridge::Identity]);
    let single = WNetSpec::new(Variant::I, 3);
    assert_eq!(single.stages[0].config, UNetConfig::image(3));
}

#[test]
fn all_variants_preserve_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor4::from_vec([1, 1, 64, 64], (0..4096).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    for v in Variant::ALL {
        let net = compose::<f32>(&WNetSpec::new(v, 2), 1).unwrap();
        let mut g = Graph::new();
        let xi = g.input(x.clone());
        let (out, stages) = net.forward(&mut g, xi).unwrap();
        assert_eq!(g.value(out).shape(), [1, 1, 64, 64], "{v}");
        assert_eq!(stages.entries.len(), v.domains().len());
        assert!(g.value(out).all_finite());
        assert!(g.max_bridge_imag().is_finite());
    }
}

#[test]
fn zero_weights_give_zero_output_without_residual() {
    for v in [Variant::I, Variant::FI, Variant::FF] {
        let mut spec = WNetSpec::new(v, 2);
        for s in &mut spec.stages {
            s.config.residual = false;
        }
        let mut net = compose::<f64>(&spec, 1).unwrap();
        for p in net.params.iter_mut() {
            p.value.fill(0.0);
        }
        let x = Tensor4::full([2, 1, 16, 16], 0.5);
        let (y, _) = net.enhance(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn fresh_residual_networks_are_the_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Tensor4::from_vec([2, 1, 16, 16], (0..512).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    for v in Variant::ALL {
        let net = compose::<f64>(&WNetSpec::new(v, 2), 1).unwrap();
        let (y, _) = net.enhance(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-12, "{v}: {a} vs {b}");
        }
    }
}

#[test]
fn indivisible_input_rejected() {
    let net = compose::<f32>(&WNetSpec::new(Variant::I, 3), 1).unwrap();
    assert!(net.enhance(&Tensor4::full([1, 1, 30, 30], 0.5)).is_err());
    assert!(net.enhance(&Tensor4::full([1, 2, 32, 32], 0.5)).is_err());
}

#[test]
fn micro_fi_network_passes_gradient_check() {
    let spec = WNetSpec::new(Variant::FI, 2);
    let mut net = compose::<f64>(&spec, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // move off the zero-initialized heads so every layer receives gradient
    for p in net.params.iter_mut().filter(|p| p.name.contains("head.weight")) {
        for w in p.value.data_mut() {
            *w = rng.gen_range(-0.2..0.2);
        }
    }
    let x = Tensor4::from_vec([1, 1, 8, 8], (0..64).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let r = Tensor4::from_vec([1, 1, 8, 8], (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let spec_net = net.clone();
    let report = check_input_gradient(&x, |g, v| {
        let (out, _) = spec_net.forward(g, v)?;
        let ri = g.input(r.clone());
        let p = g.mul(out, ri)?;
        Ok(g.sum_all(p))
    }, DEFAULT_STEP, None).unwrap();
    assert!(report.relative_error < 1e-4, "input: {report:?}");

    let stages = net.stages.clone();
    let sp = net.spec.clone();
    let report = check_param_gradients(&mut net.params, |g, store| {
        let xi = g.input(x.clone());
        let z = g.to_spectrum(xi, sp.shifted)?;
        let z = stages[0].forward(g, store, z)?;
        let y = g.from_spectrum(z, sp.shifted)?;
        let y = stages[1].forward(g, store, y)?;
        let ri = g.input(r.clone());
        let p = g.mul(y, ri)?;
        Ok(g.sum_all(p))
    }, DEFAULT_STEP, Some(3)).unwrap();
    assert!(report.relative_error < 1e-4, "params: {report:?}");
}
