use approx::assert_relative_eq;
use ldct_wnet::nn::gradcheck::{check_input_gradient, check_param_gradients, DEFAULT_STEP};
use ldct_wnet::nn::kernels::{
    conv2_stride2, conv2d_forward, gaussian_taps, maxpool2_forward, tconv2_forward,
};
use ldct_wnet::nn::{Graph, NodeId, ParamStore, Tensor4};
use ldct_wnet::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

fn random(shape: [usize; 4], seed: u64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor4::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Values bounded away from zero, for ops with a kink at the origin.
fn away_from_zero(shape: [usize; 4], seed: u64) -> Tensor4<f64> {
    random(shape, seed).map(|v| if v >= 0.0 { v + 0.05 } else { v - 0.05 })
}

/// Projects a tensor node onto a fixed random direction, giving a scalar.
fn project(g: &mut Graph<f64>, y: NodeId, seed: u64) -> Result<NodeId> {
    let r = random(g.value(y).shape(), seed);
    let r = g.input(r);
    let p = g.mul(y, r)?;
    Ok(g.sum_all(p))
}

fn naive_conv(x: &Tensor4<f64>, w: &Tensor4<f64>, b: &Tensor4<f64>) -> Tensor4<f64> {
    let [n, cin, h, wd] = x.shape();
    let [cout, _, k, _] = w.shape();
    let p = (k / 2) as isize;
    let mut out = Tensor4::zeros([n, cout, h, wd]);
    for bi in 0..n {
        for o in 0..cout {
            for i in 0..h {
                for j in 0..wd {
                    let mut acc = b.data()[o];
                    for c in 0..cin {
                        for a in 0..k {
                            for bb in 0..k {
                                let (r, s) = (i as isize + a as isize - p, j as isize + bb as isize - p);
                                if r >= 0 && s >= 0 && (r as usize) < h && (s as usize) < wd {
                                    acc += w.at(o, c, a, bb) * x.at(bi, c, r as usize, s as usize);
                                }
                            }
                        }
                    }
                    let idx = out.index(bi, o, i, j);
                    out.data_mut()[idx] = acc;
                }
            }
        }
    }
    out
}

#[test]
fn conv_matches_direct_loops() {
    for (seed, shape, cout, k) in [(1, [2, 3, 7, 5], 4, 3), (2, [1, 1, 6, 6], 2, 1), (3, [1, 2, 4, 9], 3, 5)] {
        let x = random(shape, seed);
        let w = random([cout, shape[1], k, k], seed + 10);
        let b = random([cout, 1, 1, 1], seed + 20);
        let fast = conv2d_forward(&x, &w, &b);
        let slow = naive_conv(&x, &w, &b);
        for (a, e) in fast.data().iter().zip(slow.data()) {
            assert_relative_eq!(a, e, epsilon = 1e-12);
        }
    }
}

#[test]
fn identity_kernel_reproduces_input() {
    let x = random([1, 1, 5, 5], 4);
    let mut w = Tensor4::zeros([1, 1, 3, 3]);
    w.data_mut()[4] = 1.0;
    assert_eq!(conv2d_forward(&x, &w, &Tensor4::zeros([1, 1, 1, 1])), x);
}

#[test]
fn ones_kernel_counts_neighbours() {
    // 2x2 ones image, 3x3 ones kernel: each output sums all four pixels
    let x = Tensor4::full([1, 1, 2, 2], 1.0);
    let w = Tensor4::full([1, 1, 3, 3], 1.0);
    let y = conv2d_forward(&x, &w, &Tensor4::zeros([1, 1, 1, 1]));
    assert_eq!(y.data(), &[4.0; 4]);
    // 3x3 ones image: corners see 4, edges 6, centre 9
    let x = Tensor4::full([1, 1, 3, 3], 1.0);
    let y = conv2d_forward(&x, &w, &Tensor4::zeros([1, 1, 1, 1]));
    assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
}

#[test]
fn transpose_conv_is_adjoint_of_strided_conv() {
    let x = random([2, 3, 4, 5], 5);
    let w = random([3, 2, 2, 2], 6);
    let y = random([2, 2, 8, 10], 7);
    let tx = tconv2_forward(&x, &w, &Tensor4::zeros([2, 1, 1, 1]));
    let sy = conv2_stride2(&y, &w);
    assert_relative_eq!(tx.dot(&y), x.dot(&sy), max_relative = 1e-12);
}

#[test]
fn maxpool_relu_concat_values() {
    let x = Tensor4::from_vec([1, 1, 2, 4], vec![1.0, -2.0, 0.5, 0.25, 3.0, 0.0, -1.0, 0.75]).unwrap();
    let (y, _) = maxpool2_forward(&x);
    assert_eq!(y.data(), &[3.0, 0.75]);

    let mut g = Graph::new();
    let a = g.input(x.clone());
    let r = g.relu(a);
    assert_eq!(g.value(r).data(), &[1.0, 0.0, 0.5, 0.25, 3.0, 0.0, 0.0, 0.75]);
    let b = g.input(Tensor4::full([1, 2, 2, 4], 9.0));
    let c = g.concat_channels(a, b).unwrap();
    assert_eq!(g.value(c).shape(), [1, 3, 2, 4]);
    assert_eq!(g.value(c).plane(0, 0), x.data());
    assert!(g.value(c).plane(0, 2).iter().all(|&v| v == 9.0));
}

#[test]
fn gradient_of_sum_is_ones() {
    let mut g = Graph::new();
    let x = g.variable(random([2, 3, 4, 4], 8));
    let s = g.sum_all(x);
    g.backward(s).unwrap();
    assert!(g.grad(x).unwrap().data().iter().all(|&v| v == 1.0));
}

#[test]
fn frozen_inputs_receive_no_gradient() {
    let mut g = Graph::new();
    let x = g.input(random([1, 1, 4, 4], 9));
    let v = g.variable(random([1, 1, 4, 4], 10));
    let p = g.mul(x, v).unwrap();
    let s = g.sum_all(p);
    g.backward(s).unwrap();
    assert!(g.grad(x).is_none());
    assert!(g.grad(v).is_some());
}

#[test]
fn backward_requires_scalar_root() {
    let mut g = Graph::new();
    let x = g.variable(random([1, 1, 2, 2], 11));
    let y = g.relu(x);
    assert!(g.backward(y).is_err());
}

#[test]
fn repeated_training_cycles_stay_finite() {
    let mut store = ParamStore::new();
    let w = store.add("w", random([2, 1, 3, 3], 12));
    let b = store.add("b", Tensor4::zeros([2, 1, 1, 1]));
    let x = random([2, 1, 8, 8], 13);
    for _ in 0..200 {
        let mut g = Graph::new();
        let xi = g.input(x.clone());
        let (wn, bn) = (g.param(&store, w), g.param(&store, b));
        let y = g.conv2d(xi, wn, bn).unwrap();
        let y = g.relu(y);
        let y = g.maxpool2(y).unwrap();
        let m = g.mean_all(y);
        g.backward(m).unwrap();
        store.zero_grads();
        g.accumulate_param_grads(&mut store);
        for p in store.iter_mut() {
            let step = p.grad.map(|v| -0.01 * v);
            p.value.add_assign(&step);
        }
        assert!(store.all_finite());
    }
}

#[test]
fn conv_and_transpose_conv_parameter_gradients() {
    let mut store = ParamStore::new();
    let w = store.add("w", random([3, 2, 3, 3], 14));
    let b = store.add("b", random([3, 1, 1, 1], 15));
    let tw = store.add("tw", random([3, 2, 2, 2], 16));
    let tb = store.add("tb", random([2, 1, 1, 1], 17));
    let x = random([2, 2, 4, 4], 18);
    let report = check_param_gradients(
        &mut store,
        |g, s| {
            let xi = g.input(x.clone());
            let (wn, bn, twn, tbn) = (g.param(s, w), g.param(s, b), g.param(s, tw), g.param(s, tb));
            let y = g.conv2d(xi, wn, bn)?;
            let y = g.transpose_conv2(y, twn, tbn)?;
            project(g, y, 19)
        },
        DEFAULT_STEP,
        None,
    )
    .unwrap();
    assert!(report.relative_error < TOL, "{report:?}");
}

type Build = fn(&mut Graph<f64>, NodeId, [usize; 4], u64) -> Result<NodeId>;

fn op_table() -> Vec<(&'static str, Build, bool)> {
    // (name, builder, needs input bounded away from zero)
    vec![
        ("conv2d", |g, x, s, seed| {
            let w = g.input(random([2, s[1], 3, 3], seed));
            let b = g.input(random([2, 1, 1, 1], seed + 1));
            let y = g.conv2d(x, w, b)?;
            project(g, y, seed + 2)
        }, false),
        ("transpose_conv2", |g, x, s, seed| {
            let w = g.input(random([s[1], 2, 2, 2], seed));
            let b = g.input(random([2, 1, 1, 1], seed + 1));
            let y = g.transpose_conv2(x, w, b)?;
            project(g, y, seed + 2)
        }, false),
        ("maxpool2", |g, x, _, seed| {
            let y = g.maxpool2(x)?;
            project(g, y, seed)
        }, false),
        ("relu", |g, x, _, seed| {
            let y = g.relu(x);
            project(g, y, seed)
        }, true),
        ("concat", |g, x, _, seed| {
            let y = g.concat_channels(x, x)?;
            project(g, y, seed)
        }, false),
        ("add_sub_mul", |g, x, s, seed| {
            let c = g.input(random(s, seed));
            let a = g.add(x, c)?;
            let b = g.sub(a, x)?;
            let m = g.mul(a, x)?;
            let y = g.add(b, m)?;
            project(g, y, seed + 1)
        }, false),
        ("div", |g, x, s, seed| {
            let d = g.input(random(s, seed).map(|v| v.abs() + 0.5));
            let a = g.div(x, d)?;
            let q = g_sq_plus_one(g, x)?;
            let y = g.div(d, q)?;
            let y = g.add(a, y)?;
            project(g, y, seed + 1)
        }, false),
        ("scale_add_scalar", |g, x, _, seed| {
            let y = g.scale(x, -1.7);
            let y = g.add_scalar(y, 0.3);
            project(g, y, seed)
        }, false),
        ("abs", |g, x, _, seed| {
            let y = g.abs(x);
            project(g, y, seed)
        }, true),
        ("pow", |g, x, _, seed| {
            let a = g.abs(x);
            let y = g.pow(a, 0.37);
            project(g, y, seed)
        }, true),
        ("clamp_min", |g, x, _, seed| {
            let y = g.clamp_min(x, 0.0);
            project(g, y, seed)
        }, true),
        ("blur", |g, x, _, seed| {
            let taps = gaussian_taps(3, 1.5);
            let y = g.blur(x, &taps)?;
            project(g, y, seed)
        }, false),
        ("avgpool2", |g, x, _, seed| {
            let y = g.avgpool2(x)?;
            project(g, y, seed)
        }, false),
        ("spatial_mean", |g, x, _, seed| {
            let y = g.spatial_mean(x);
            project(g, y, seed)
        }, false),
        ("mean_all", |g, x, _, _| {
            let y = g.mul(x, x)?;
            Ok(g.mean_all(y))
        }, false),
    ]
}

fn g_sq_plus_one(g: &mut Graph<f64>, x: NodeId) -> Result<NodeId> {
    let s = g.mul(x, x)?;
    Ok(g.add_scalar(s, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn every_op_passes_gradient_check(
        n in 1usize..3, c in 1usize..4, h in 2usize..5, w in 2usize..5, seed in 0u64..1000,
    ) {
        // even spatial dims so pooling ops apply
        let shape = [n, c, 2 * h, 2 * w];
        for (name, build, kink) in op_table() {
            let x = if kink { away_from_zero(shape, seed) } else { random(shape, seed) };
            let r = check_input_gradient(&x, |g, v| build(g, v, shape, seed + 100), DEFAULT_STEP, Some(64)).unwrap();
            prop_assert!(r.relative_error < TOL, "{name} on {shape:?}: {r:?}");
        }
    }

    #[test]
    fn fourier_bridges_pass_gradient_check(s in 1usize..5, n in 1usize..3, shifted in any::<bool>(), seed in 0u64..1000) {
        let size = 2 * s + (seed as usize % 2);
        let x = random([n, 1, size, size], seed);
        let r = check_input_gradient(&x, |g, v| {
            let z = g.to_spectrum(v, shifted)?;
            project(g, z, seed + 1)
        }, DEFAULT_STEP, None).unwrap();
        prop_assert!(r.relative_error < TOL, "forward bridge: {r:?}");
        let z = random([n, 2, size, size], seed + 2);
        let r = check_input_gradient(&z, |g, v| {
            let y = g.from_spectrum(v, shifted)?;
            project(g, y, seed + 3)
        }, DEFAULT_STEP, None).unwrap();
        prop_assert!(r.relative_error < TOL, "inverse bridge: {r:?}");
    }
}
