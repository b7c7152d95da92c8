//! Finite-difference checks for every hand-written backward pass.

use insilico_core::nn::gradcheck::{fd_input_grad, fd_param_grads, max_rel_err};
use insilico_core::nn::{attention_backward, attention_cached, Conv2d, GradStore, GroupNorm, Linear, Parameterized};
use insilico_core::nn::ops;
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn rand_array3(d: (usize, usize, usize), rng: &mut ChaCha8Rng) -> Array3<f64> {
    Array3::from_shape_fn(d, |_| rng.random_range(-1.0..1.0))
}

fn rand_array2(d: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn(d, |_| rng.random_range(-1.0..1.0))
}

/// Weighted-sum loss so the output gradient is a fixed random field.
fn weighted_sum(y: &Array3<f64>, w: &Array3<f64>) -> f64 {
    y.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    for (stride, pad) in [(1, 1), (2, 1), (1, 0)] {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut conv: Conv2d<f64> = Conv2d::new("c", 3, 4, 3, stride, pad, &mut rng);
        let x = rand_array3((3, 6, 6), &mut rng);
        let w = {
            let y = conv.forward(&x);
            rand_array3(y.dim(), &mut rng)
        };

        let mut sink = GradStore::new();
        let gx = conv.backward(&x, &w, &mut sink);

        let mut xd = x.clone().into_dyn();
        let fd_gx = fd_input_grad(
            &mut xd,
            |xv| {
                let x3 = xv.clone().into_dimensionality().unwrap();
                weighted_sum(&conv.forward(&x3), &w)
            },
            H,
        );
        assert!(
            max_rel_err(&gx.into_dyn(), &fd_gx) < TOL,
            "conv input grad (stride={stride}, pad={pad})"
        );

        let fd_params = fd_param_grads(&mut conv, |c| weighted_sum(&c.forward(&x), &w), H);
        for (name, fd) in fd_params {
            let analytic = sink.get(&name).unwrap();
            assert!(max_rel_err(analytic, &fd) < TOL, "conv param {name}");
        }
    }
}

#[test]
fn group_norm_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut gn: GroupNorm<f64> = GroupNorm::new("g", 6, 3);
    // Non-trivial affine parameters.
    gn.gamma = Array1::from_shape_fn(6, |_| rng.random_range(0.5..1.5));
    gn.beta = Array1::from_shape_fn(6, |_| rng.random_range(-0.5..0.5));
    let x = rand_array3((6, 4, 4), &mut rng);
    let w = rand_array3((6, 4, 4), &mut rng);

    let (_, cache) = gn.forward_cached(&x);
    let mut sink = GradStore::new();
    let gx = gn.backward(&cache, &w, &mut sink);

    let mut xd = x.clone().into_dyn();
    let fd_gx = fd_input_grad(
        &mut xd,
        |xv| {
            let x3 = xv.clone().into_dimensionality().unwrap();
            weighted_sum(&gn.forward(&x3), &w)
        },
        H,
    );
    assert!(max_rel_err(&gx.into_dyn(), &fd_gx) < TOL, "group norm input grad");

    let fd_params = fd_param_grads(&mut gn, |g| weighted_sum(&g.forward(&x), &w), H);
    for (name, fd) in fd_params {
        let analytic = sink.get(&name).unwrap();
        assert!(max_rel_err(analytic, &fd) < TOL, "group norm param {name}");
    }
}

#[test]
fn linear_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut lin: Linear<f64> = Linear::new("l", 5, 3, &mut rng);
    let x = Array1::from_shape_fn(5, |_| rng.random_range(-1.0..1.0));
    let w = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));

    let mut sink = GradStore::new();
    let gx = lin.backward(&x, &w, &mut sink);

    let mut xd = x.clone().into_dyn();
    let fd_gx = fd_input_grad(
        &mut xd,
        |xv| {
            let x1: Array1<f64> = xv.clone().into_dimensionality().unwrap();
            lin.forward(&x1).iter().zip(w.iter()).map(|(a, b)| a * b).sum()
        },
        H,
    );
    assert!(max_rel_err(&gx.into_dyn(), &fd_gx) < TOL);

    let fd_params = fd_param_grads(
        &mut lin,
        |l| l.forward(&x).iter().zip(w.iter()).map(|(a, b)| a * b).sum(),
        H,
    );
    for (name, fd) in fd_params {
        assert!(max_rel_err(sink.get(&name).unwrap(), &fd) < TOL, "linear param {name}");
    }
}

#[test]
fn attention_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let q = rand_array2((4, 3), &mut rng);
    let k = rand_array2((5, 3), &mut rng);
    let v = rand_array2((5, 2), &mut rng);
    let w = rand_array2((4, 2), &mut rng);

    let (_, cache) = attention_cached(&q, &k, &v).unwrap();
    let (gq, gk, gv) = attention_backward(&q, &k, &v, &cache, &w);

    let loss = |q: &Array2<f64>, k: &Array2<f64>, v: &Array2<f64>| -> f64 {
        let y = insilico_core::nn::attention(q, k, v).unwrap();
        y.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
    };

    for (name, analytic, arr) in [("q", gq, q.clone()), ("k", gk, k.clone()), ("v", gv, v.clone())] {
        let mut xd = arr.clone().into_dyn();
        let fd = fd_input_grad(
            &mut xd,
            |xv| {
                let x2: Array2<f64> = xv.clone().into_dimensionality().unwrap();
                match name {
                    "q" => loss(&x2, &k, &v),
                    "k" => loss(&q, &x2, &v),
                    _ => loss(&q, &k, &x2),
                }
            },
            H,
        );
        assert!(max_rel_err(&analytic.into_dyn(), &fd) < TOL, "attention grad {name}");
    }
}

#[test]
fn activation_and_resampling_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let x = rand_array3((2, 4, 4), &mut rng);
    let w44 = rand_array3((2, 4, 4), &mut rng);
    let w22 = rand_array3((2, 2, 2), &mut rng);
    let w88 = rand_array3((2, 8, 8), &mut rng);

    // silu
    let gx = ops::silu_backward(&x, &w44);
    let mut xd = x.clone().into_dyn();
    let fd = fd_input_grad(
        &mut xd,
        |xv| weighted_sum(&ops::silu(&xv.clone().into_dimensionality().unwrap()), &w44),
        H,
    );
    assert!(max_rel_err(&gx.into_dyn(), &fd) < TOL, "silu");

    // avg_pool2
    let gx = ops::avg_pool2_backward(&w22, 4, 4);
    let mut xd = x.clone().into_dyn();
    let fd = fd_input_grad(
        &mut xd,
        |xv| weighted_sum(&ops::avg_pool2(&xv.clone().into_dimensionality().unwrap()), &w22),
        H,
    );
    assert!(max_rel_err(&gx.into_dyn(), &fd) < TOL, "avg_pool2");

    // upsample_nearest2
    let gx = ops::upsample_nearest2_backward(&w88);
    let mut xd = x.clone().into_dyn();
    let fd = fd_input_grad(
        &mut xd,
        |xv| weighted_sum(&ops::upsample_nearest2(&xv.clone().into_dimensionality().unwrap()), &w88),
        H,
    );
    assert!(max_rel_err(&gx.into_dyn(), &fd) < TOL, "upsample_nearest2");

    // relu (kept away from the kink)
    let x_off = x.mapv(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    let gx = ops::relu_backward(&x_off, &w44);
    let mut xd = x_off.clone().into_dyn();
    let fd = fd_input_grad(
        &mut xd,
        |xv| weighted_sum(&ops::relu(&xv.clone().into_dimensionality().unwrap()), &w44),
        H,
    );
    assert!(max_rel_err(&gx.into_dyn(), &fd) < TOL, "relu");
}
