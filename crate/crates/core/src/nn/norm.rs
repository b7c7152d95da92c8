//! Group normalization.

use crate::nn::{ParamMuts, ParamRefs, Parameterized};
use crate::scalar::Scalar;
use ndarray::{Array1, Array3, Axis};

/// GroupNorm over (channels, height, width) with per-channel affine.
#[derive(Debug, Clone)]
pub struct GroupNorm<S> {
    name: String,
    pub gamma: Array1<S>,
    pub beta: Array1<S>,
    pub groups: usize,
    pub eps: f64,
}

/// Values cached by the forward pass for backprop.
#[derive(Debug, Clone)]
pub struct GroupNormCache<S> {
    pub x_hat: Array3<S>,
    /// 1/√(σ²+ε) per group.
    pub inv_std: Vec<S>,
}

impl<S: Scalar> GroupNorm<S> {
    pub fn new(name: impl Into<String>, channels: usize, groups: usize) -> Self {
        assert!(channels % groups == 0, "channels {channels} not divisible by groups {groups}");
        GroupNorm {
            name: name.into(),
            gamma: Array1::from_elem(channels, S::one()),
            beta: Array1::zeros(channels),
            groups,
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Array3<S>) -> Array3<S> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &Array3<S>) -> (Array3<S>, GroupNormCache<S>) {
        let (c, h, w) = x.dim();
        let per = c / self.groups;
        let mut x_hat = x.clone();
        let mut inv_std = Vec::with_capacity(self.groups);
        for g in 0..self.groups {
            let mut slice = x_hat.slice_mut(ndarray::s![g * per..(g + 1) * per, .., ..]);
            let n = S::from_f64((per * h * w) as f64);
            let mean = slice.sum() / n;
            let mut var = S::zero();
            slice.iter().for_each(|v| {
                let d = *v - mean;
                var += d * d;
            });
            var /= n;
            let istd = S::one() / (var + S::from_f64(self.eps)).sqrt();
            slice.mapv_inplace(|v| (v - mean) * istd);
            inv_std.push(istd);
        }
        let mut y = x_hat.clone();
        for (ci, mut plane) in y.axis_iter_mut(Axis(0)).enumerate() {
            let g = self.gamma[ci];
            let b = self.beta[ci];
            plane.mapv_inplace(|v| v * g + b);
        }
        (y, GroupNormCache { x_hat, inv_std })
    }

    pub fn backward(&self, cache: &GroupNormCache<S>, gy: &Array3<S>, sink: &mut crate::nn::GradStore<S>) -> Array3<S> {
        let (c, h, w) = cache.x_hat.dim();
        let per = c / self.groups;

        let mut dgamma = Array1::zeros(c);
        let mut dbeta = Array1::zeros(c);
        for ci in 0..c {
            let mut dg = S::zero();
            let mut db = S::zero();
            for i in 0..h {
                for j in 0..w {
                    let g = gy[[ci, i, j]];
                    dg += g * cache.x_hat[[ci, i, j]];
                    db += g;
                }
            }
            dgamma[ci] = dg;
            dbeta[ci] = db;
        }

        let mut gx = Array3::zeros((c, h, w));
        for g in 0..self.groups {
            let n = S::from_f64((per * h * w) as f64);
            // dx_hat = gy · γ (per channel)
            // dx = istd · (dx_hat − mean(dx_hat) − x_hat · mean(dx_hat ∘ x_hat))
            let mut mean_dxh = S::zero();
            let mut mean_dxh_xh = S::zero();
            for ci in g * per..(g + 1) * per {
                for i in 0..h {
                    for j in 0..w {
                        let dxh = gy[[ci, i, j]] * self.gamma[ci];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * cache.x_hat[[ci, i, j]];
                    }
                }
            }
            mean_dxh /= n;
            mean_dxh_xh /= n;
            let istd = cache.inv_std[g];
            for ci in g * per..(g + 1) * per {
                for i in 0..h {
                    for j in 0..w {
                        let dxh = gy[[ci, i, j]] * self.gamma[ci];
                        gx[[ci, i, j]] = istd * (dxh - mean_dxh - cache.x_hat[[ci, i, j]] * mean_dxh_xh);
                    }
                }
            }
        }

        sink.accumulate(&format!("{}.g", self.name), dgamma.into_dyn());
        sink.accumulate(&format!("{}.b", self.name), dbeta.into_dyn());
        gx
    }
}

impl<S: Scalar> Parameterized<S> for GroupNorm<S> {
    fn params(&self) -> ParamRefs<'_, S> {
        vec![
            (format!("{}.g", self.name), self.gamma.view().into_dyn()),
            (format!("{}.b", self.name), self.beta.view().into_dyn()),
        ]
    }

    fn params_mut(&mut self) -> ParamMuts<'_, S> {
        vec![
            (format!("{}.g", self.name), self.gamma.view_mut().into_dyn()),
            (format!("{}.b", self.name), self.beta.view_mut().into_dyn()),
        ]
    }
}
