//! Stateless activations and resampling ops with their backward passes.

use crate::scalar::Scalar;
use ndarray::Array3;

#[inline]
pub fn sigmoid_scalar<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

pub fn silu<S: Scalar>(x: &Array3<S>) -> Array3<S> {
    x.mapv(|v| v * sigmoid_scalar(v))
}

/// d/dx [x·σ(x)] = σ(x)·(1 + x·(1−σ(x)))
pub fn silu_backward<S: Scalar>(x: &Array3<S>, gy: &Array3<S>) -> Array3<S> {
    let mut gx = gy.clone();
    gx.zip_mut_with(x, |g, xv| {
        let s = sigmoid_scalar(*xv);
        *g = *g * s * (S::one() + *xv * (S::one() - s));
    });
    gx
}

pub fn relu<S: Scalar>(x: &Array3<S>) -> Array3<S> {
    x.mapv(|v| v.max(S::zero()))
}

pub fn relu_backward<S: Scalar>(x: &Array3<S>, gy: &Array3<S>) -> Array3<S> {
    let mut gx = gy.clone();
    gx.zip_mut_with(x, |g, xv| {
        if *xv <= S::zero() {
            *g = S::zero();
        }
    });
    gx
}

/// 2x2 average pooling with stride 2.
pub fn avg_pool2<S: Scalar>(x: &Array3<S>) -> Array3<S> {
    let (c, h, w) = x.dim();
    let quarter = S::from_f64(0.25);
    Array3::from_shape_fn((c, h / 2, w / 2), |(ci, i, j)| {
        (x[[ci, 2 * i, 2 * j]] + x[[ci, 2 * i, 2 * j + 1]] + x[[ci, 2 * i + 1, 2 * j]] + x[[ci, 2 * i + 1, 2 * j + 1]])
            * quarter
    })
}

pub fn avg_pool2_backward<S: Scalar>(gy: &Array3<S>, in_h: usize, in_w: usize) -> Array3<S> {
    let (c, oh, ow) = gy.dim();
    let quarter = S::from_f64(0.25);
    let mut gx = Array3::zeros((c, in_h, in_w));
    for ci in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let g = gy[[ci, i, j]] * quarter;
                gx[[ci, 2 * i, 2 * j]] = g;
                gx[[ci, 2 * i, 2 * j + 1]] = g;
                gx[[ci, 2 * i + 1, 2 * j]] = g;
                gx[[ci, 2 * i + 1, 2 * j + 1]] = g;
            }
        }
    }
    gx
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample_nearest2<S: Scalar>(x: &Array3<S>) -> Array3<S> {
    let (c, h, w) = x.dim();
    Array3::from_shape_fn((c, h * 2, w * 2), |(ci, i, j)| x[[ci, i / 2, j / 2]])
}

pub fn upsample_nearest2_backward<S: Scalar>(gy: &Array3<S>) -> Array3<S> {
    let (c, oh, ow) = gy.dim();
    let (h, w) = (oh / 2, ow / 2);
    let mut gx = Array3::zeros((c, h, w));
    for ci in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                gx[[ci, i / 2, j / 2]] += gy[[ci, i, j]];
            }
        }
    }
    gx
}
