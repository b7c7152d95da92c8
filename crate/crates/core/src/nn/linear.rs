//! Dense layer for timestep embeddings.

use crate::nn::{ParamMuts, ParamRefs, Parameterized};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Linear<S> {
    name: String,
    pub weight: Array2<S>, // (out, in)
    pub bias: Array1<S>,
}

impl<S: Scalar> Linear<S> {
    pub fn new<R: Rng + ?Sized>(name: impl Into<String>, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        let weight = Array2::from_shape_fn((out_dim, in_dim), |_| S::from_f64(rng.random_range(-bound..bound)));
        let bias = Array1::from_shape_fn(out_dim, |_| S::from_f64(rng.random_range(-bound..bound)));
        Linear { name: name.into(), weight, bias }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn forward(&self, x: &Array1<S>) -> Array1<S> {
        self.weight.dot(x) + &self.bias
    }

    pub fn backward(&self, x: &Array1<S>, gy: &Array1<S>, sink: &mut crate::nn::GradStore<S>) -> Array1<S> {
        let gw = gy
            .view()
            .insert_axis(ndarray::Axis(1))
            .dot(&x.view().insert_axis(ndarray::Axis(0)));
        sink.accumulate(&format!("{}.w", self.name), gw.into_dyn());
        sink.accumulate(&format!("{}.b", self.name), gy.clone().into_dyn());
        self.weight.t().dot(gy)
    }
}

impl<S: Scalar> Parameterized<S> for Linear<S> {
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
