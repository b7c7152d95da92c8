//! 2-D convolution via im2col + GEMM.

use crate::nn::{ParamMuts, ParamRefs, Parameterized};
use crate::scalar::Scalar;
use ndarray::{linalg::general_mat_mul, Array1, Array2, Array3, Array4};
use rand::Rng;

/// Zero-padded 2-D convolution over (channels, height, width).
#[derive(Debug, Clone)]
pub struct Conv2d<S> {
    name: String,
    pub weight: Array4<S>, // (out, in, kh, kw)
    pub bias: Array1<S>,
    pub stride: usize,
    pub pad: usize,
}

impl<S: Scalar> Conv2d<S> {
    /// Uniform(-1/√fan_in, 1/√fan_in) initialization.
    pub fn new<R: Rng + ?Sized>(
        name: impl Into<String>,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_ch * kernel * kernel;
        let bound = (1.0 / fan_in as f64).sqrt();
        let weight = Array4::from_shape_fn((out_ch, in_ch, kernel, kernel), |_| {
            S::from_f64(rng.random_range(-bound..bound))
        });
        let bias = Array1::from_shape_fn(out_ch, |_| S::from_f64(rng.random_range(-bound..bound)));
        Conv2d { name: name.into(), weight, bias, stride, pad }
    }

    /// Zero-initialized variant, used for the last layer of residual
    /// branches and output heads so training starts from a stable identity.
    pub fn new_zeroed(name: impl Into<String>, in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        Conv2d {
            name: name.into(),
            weight: Array4::zeros((out_ch, in_ch, kernel, kernel)),
            bias: Array1::zeros(out_ch),
            stride,
            pad,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let k = self.weight.dim().2;
        ((h + 2 * self.pad - k) / self.stride + 1, (w + 2 * self.pad - k) / self.stride + 1)
    }

    pub fn forward(&self, x: &Array3<S>) -> Array3<S> {
        let (out_ch, _, k, _) = self.weight.dim();
        let (_, h, w) = x.dim();
        let (oh, ow) = self.out_hw(h, w);
        let col = im2col(x, k, self.stride, self.pad);
        let w2 = self
            .weight
            .view()
            .into_shape_with_order((out_ch, col.dim().0))
            .expect("weight reshape");
        let mut y2 = Array2::zeros((out_ch, oh * ow));
        general_mat_mul(S::one(), &w2, &col, S::zero(), &mut y2);
        for (mut row, b) in y2.outer_iter_mut().zip(self.bias.iter()) {
            row.mapv_inplace(|v| v + *b);
        }
        y2.into_shape_with_order((out_ch, oh, ow)).expect("output reshape")
    }

    /// Backward pass: returns the input gradient and accumulates weight and
    /// bias gradients into `sink`. Recomputes im2col from the cached input
    /// rather than storing the (much larger) column matrix.
    pub fn backward(&self, x: &Array3<S>, gy: &Array3<S>, sink: &mut crate::nn::GradStore<S>) -> Array3<S> {
        let (out_ch, in_ch, k, _) = self.weight.dim();
        let (_, h, w) = x.dim();
        let (oh, ow) = self.out_hw(h, w);
        let col = im2col(x, k, self.stride, self.pad);
        let gy2 = gy
            .view()
            .into_shape_with_order((out_ch, oh * ow))
            .expect("grad reshape");

        let mut gw2 = Array2::zeros((out_ch, in_ch * k * k));
        general_mat_mul(S::one(), &gy2, &col.t(), S::zero(), &mut gw2);
        let gw = gw2.into_shape_with_order((out_ch, in_ch, k, k)).expect("gw reshape");
        let gb = Array1::from_iter(gy2.outer_iter().map(|row| row.sum()));

        let w2 = self
            .weight
            .view()
            .into_shape_with_order((out_ch, in_ch * k * k))
            .expect("weight reshape");
        let mut gcol = Array2::zeros(col.raw_dim());
        general_mat_mul(S::one(), &w2.t(), &gy2, S::zero(), &mut gcol);
        let gx = col2im(&gcol, in_ch, h, w, k, self.stride, self.pad);

        sink.accumulate(&format!("{}.w", self.name), gw.into_dyn());
        sink.accumulate(&format!("{}.b", self.name), gb.into_dyn());
        gx
    }
}

impl<S: Scalar> Parameterized<S> for Conv2d<S> {
    fn params(&self) -> ParamRefs<'_, S> {
        vec![
            (format!("{}.w", self.name), self.weight.view().into_dyn()),
            (format!("{}.b", self.name), self.bias.view().into_dyn()),
        ]
    }

    fn params_mut(&mut self) -> ParamMuts<'_, S> {
        vec![
            (format!("{}.w", self.name), self.weight.view_mut().into_dyn()),
            (format!("{}.b", self.name), self.bias.view_mut().into_dyn()),
        ]
    }
}

/// Unfold (channels, h, w) into (channels·k·k, out_h·out_w) patch columns.
pub fn im2col<S: Scalar>(x: &Array3<S>, k: usize, stride: usize, pad: usize) -> Array2<S> {
    let (c, h, w) = x.dim();
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut col = Array2::zeros((c * k * k, oh * ow));
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                for oi in 0..oh {
                    let si = (oi * stride + ki) as isize - pad as isize;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    for oj in 0..ow {
                        let sj = (oj * stride + kj) as isize - pad as isize;
                        if sj < 0 || sj >= w as isize {
                            continue;
                        }
                        col[[row, oi * ow + oj]] = x[[ci, si as usize, sj as usize]];
                    }
                }
            }
        }
    }
    col
}

/// Scatter-add inverse of [`im2col`].
pub fn col2im<S: Scalar>(col: &Array2<S>, c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Array3<S> {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut x = Array3::zeros((c, h, w));
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                for oi in 0..oh {
                    let si = (oi * stride + ki) as isize - pad as isize;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    for oj in 0..ow {
                        let sj = (oj * stride + kj) as isize - pad as isize;
                        if sj < 0 || sj >= w as isize {
                            continue;
                        }
                        x[[ci, si as usize, sj as usize]] += col[[row, oi * ow + oj]];
                    }
                }
            }
        }
    }
    x
}
